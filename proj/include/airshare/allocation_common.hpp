#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "airshare/grid.hpp"

namespace airshare {

/// How subgradients are scaled before the projected multiplier step.
///  raw: m <- [m - alpha(t) * (limit - usage)]^+ exactly as written.
///  normalized: the relative slack (limit - usage) / limit is clipped to [-1, 1] and
///    divided by the limit, so multiplier * limit moves by at most alpha(t) per step.
///    Constraints measured in very different units then share one step-size constant,
///    and the all-power first iterate cannot throw a multiplier far past its optimum.
enum class MultiplierScaling { raw, normalized };

struct DualConfig {
    int max_dual_iters = 200;
    double tol_dual = 1e-4;     // largest scaled multiplier change that counts as converged
    double tol_gap = 1e-4;      // relative duality gap that also counts as converged
    double step_a1 = 3.0;       // omega (licensed interference) / mu (unlicensed interference)
    double step_a2 = 3.0;       // theta / nu (per-step power budgets)
    double step_a3 = 3.0;       // lambda (residual rate targets)
    MultiplierScaling scaling = MultiplierScaling::normalized;
    bool refine_powers = true;  // re-solve powers exactly for the best assignments seen
    std::size_t refine_pool = 10;  // how many distinct assignments are re-solved
    int reassign_passes = 2;       // single-slot owner-change passes when rate floors are active
};

/// Weight of the exact penalty that trades rate for rate-floor shortfall.
inline constexpr double kShortfallPenalty = 1e3;
/// Shortfall above this counts as missing the floors.
inline constexpr double kShortfallTol = 1e-6;

/// Scalar ranking of plans: any plan within the floors beats any plan that misses them,
/// then rate minus the penalized shortfall. A binary reassignment can cost more rate than
/// the penalty charges for a small shortfall, so the penalty alone is not exact there.
inline double plan_merit(double rate, double shortfall) {
    constexpr double kMissOffset = 1e6;
    return rate - kShortfallPenalty * shortfall - (shortfall > kShortfallTol ? kMissOffset : 0.0);
}

/// Diminishing schedule a / (1 + t).
inline double step_size(double a, int t) { return a / (1.0 + static_cast<double>(t)); }

inline bool gap_closed(double dual, double primal, double tol) {
    return primal > 0.0 && dual - primal <= tol * primal;
}

/// Subgradient (limit - usage) as used by the multiplier step for the given scaling.
inline double scaled_subgradient(double slack, double limit, MultiplierScaling scaling) {
    if (scaling == MultiplierScaling::raw) return slack;
    return std::clamp(slack / limit, -1.0, 1.0) / limit;
}

/// The best distinct assignments met by a dual loop, ranked by the merit of their
/// repaired iterates. Ties keep the earlier entry, so the pool is deterministic.
class AssignmentPool {
public:
    explicit AssignmentPool(std::size_t capacity) : capacity_(capacity) {}

    void offer(const Grid3<std::uint8_t>& rho, double merit) {
        for (auto& e : entries_) {
            if (e.second == rho) {
                e.first = std::max(e.first, merit);
                sort();
                return;
            }
        }
        entries_.emplace_back(merit, rho);
        sort();
        if (entries_.size() > capacity_) entries_.pop_back();
    }

    const std::vector<std::pair<double, Grid3<std::uint8_t>>>& entries() const { return entries_; }

private:
    void sort() {
        std::stable_sort(entries_.begin(), entries_.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
    }

    std::size_t capacity_;
    std::vector<std::pair<double, Grid3<std::uint8_t>>> entries_;
};

struct DualTraceRow {
    int iteration = 0;
    double dual_value = 0.0;     // upper bound on the band's objective, time-averaged units
    double primal_value = 0.0;   // value of the repaired primal iterate
    double max_violation = 0.0;  // relative, of the unrepaired Layer-1 iterate
};

}  // namespace airshare
