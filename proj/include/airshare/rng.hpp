#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace airshare {

/// SplitMix64 finalizer; used to derive independent sub-stream seeds from one run seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Sub-stream tags. Each consumer of randomness draws from its own stream so that
/// adding draws in one place never shifts another.
enum class StreamTag : std::uint64_t {
    fading = 1,
    random_unlicensed = 2,
    fixed_trajectory = 3,
    test_instances = 4,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag) {
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(tag)));
}

/// Portable random stream: mt19937_64 is bit-specified by the standard, and the
/// variate transforms below avoid the implementation-defined std distributions.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer uniform on [0, n).
    std::uint64_t index(std::uint64_t n) {
        // Rejection keeps it unbiased.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    /// Exponential with mean 1: the power of a unit-mean Rayleigh fading coefficient.
    double exponential() { return -std::log1p(-uniform()); }

private:
    std::mt19937_64 engine_;
};

}  // namespace airshare
