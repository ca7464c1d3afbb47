#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "airshare/allocation.hpp"
#include "airshare/channel.hpp"
#include "airshare/licensed.hpp"
#include "airshare/plan.hpp"
#include "airshare/rng.hpp"
#include "airshare/trajectory.hpp"
#include "airshare/unlicensed.hpp"

namespace airshare {

enum class Scheme { proposed, random_unlicensed, lte_a, j_ap_hover, j_ap_fixed };

inline constexpr std::array<Scheme, 5> kAllSchemes{Scheme::proposed, Scheme::random_unlicensed, Scheme::lte_a,
                                                   Scheme::j_ap_hover, Scheme::j_ap_fixed};

inline std::string_view scheme_name(Scheme s) {
    switch (s) {
        case Scheme::proposed: return "proposed";
        case Scheme::random_unlicensed: return "random-unlicensed";
        case Scheme::lte_a: return "lte-a";
        case Scheme::j_ap_hover: return "j-ap-hover";
        case Scheme::j_ap_fixed: return "j-ap-fixed";
    }
    return "?";
}

inline Scheme parse_scheme(std::string_view name) {
    for (Scheme s : kAllSchemes) {
        if (scheme_name(s) == name) return s;
    }
    throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

struct RunConfig {
    DualConfig dual;
    TrajectoryConfig trajectory;
    int max_outer_iters = 20;
    double outer_tol = 1e-3;
    std::uint64_t seed = 0;
};

/// One row of the detailed per-run trace.
struct TraceEvent {
    int outer = 0;
    std::string_view block;  // "licensed", "unlicensed", "trajectory", "outer"
    int inner = 0;
    double value = 0.0;      // primal value (bits/s/Hz)
    double bound = 0.0;      // dual value or surrogate value
    double kkt = 0.0;
    double violation = 0.0;
};

struct RunResult {
    Scheme scheme = Scheme::proposed;
    std::vector<double> trace;            // sum rate after each outer iteration
    std::vector<double> trace_violation;  // max relative violation after each outer iteration
    std::vector<TraceEvent> events;
    AllocationPlan plan;
    Trajectory trajectory;
    ConstraintReport report;
    double sum_rate = 0.0;
    double seconds = 0.0;
    std::uint64_t seed = 0;
    bool converged = false;
};

/// Seeded random walk from the hover point: each step has a uniform heading and a length
/// uniform in [0, V_max * step], so it always satisfies the speed limit.
inline Trajectory random_walk_trajectory(const Scenario& sc, std::uint64_t seed) {
    RandomStream rng(derive_seed(seed, StreamTag::fixed_trajectory));
    Trajectory t;
    t.q.resize(sc.num_steps);
    t.q[0] = sc.q_start ? *sc.q_start : su_centroid(sc);
    for (std::size_t n = 1; n < sc.num_steps; ++n) {
        const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double len = rng.uniform(0.0, sc.max_step_m());
        t.q[n] = t.q[n - 1] + Vec2{len * std::cos(heading), len * std::sin(heading)};
    }
    return t;
}

/// Uniformly random SU per (unlicensed subchannel, step), drawn once per run.
inline UnlicensedAssignment random_unlicensed_assignment(const Scenario& sc, std::uint64_t seed) {
    RandomStream rng(derive_seed(seed, StreamTag::random_unlicensed));
    UnlicensedAssignment a(sc.num_wus, sc.num_steps, -1);
    for (std::size_t m = 0; m < sc.num_wus; ++m) {
        for (std::size_t n = 0; n < sc.num_steps; ++n) a(m, n) = static_cast<int>(rng.index(sc.num_sus));
    }
    return a;
}

namespace detail {

inline bool trajectory_frozen(Scheme s) { return s == Scheme::j_ap_hover || s == Scheme::j_ap_fixed; }

inline Trajectory scheme_start(Scheme s, const Scenario& sc, std::uint64_t seed) {
    switch (s) {
        case Scheme::j_ap_hover: return hover_trajectory(sc);
        case Scheme::j_ap_fixed: return random_walk_trajectory(sc, seed);
        default: return initial_trajectory(sc);
    }
}

}  // namespace detail

/// Starting point taken from an earlier run of the same scheme. It must be feasible for
/// the scenario it is used with (true when only P_max^unlic or Gamma^unlic grew).
struct WarmStart {
    Trajectory trajectory;
    AllocationPlan plan;
};

/// Alternating optimization: spectrum and power for both bands, then the trajectory, then
/// the trajectory-dependent gains are recomputed. A re-solved allocation replaces the
/// incumbent only when it does not lower the sum rate or raise the rate shortfall, so the
/// outer trace is non-decreasing. Schemes with a frozen trajectory skip the SCA block.
inline RunResult alternate_optimize(const Scenario& sc, const RunConfig& cfg, Scheme scheme = Scheme::proposed,
                                    const WarmStart* warm = nullptr) {
    const auto started = std::chrono::steady_clock::now();
    RunResult res;
    res.scheme = scheme;
    res.seed = cfg.seed;

    Trajectory traj = warm ? warm->trajectory : detail::scheme_start(scheme, sc, cfg.seed);
    ChannelRealization ch = realize_channels(sc, traj, cfg.seed);
    std::optional<UnlicensedAssignment> fixed;
    if (scheme == Scheme::random_unlicensed) fixed = random_unlicensed_assignment(sc, cfg.seed);

    AllocationPlan incumbent = warm ? warm->plan : AllocationPlan::empty(sc);
    double value = 0.0;
    double shortfall = std::numeric_limits<double>::infinity();
    constexpr double slack = 1e-12;

    for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
        const auto alloc = solve_allocation(traj, ch, sc, cfg.dual, scheme == Scheme::lte_a, fixed);
        for (const auto& r : alloc.licensed_trace) {
            res.events.push_back({outer, "licensed", r.iteration, r.primal_value, r.dual_value, 0.0, r.max_violation});
        }
        for (const auto& r : alloc.unlicensed_trace) {
            res.events.push_back({outer, "unlicensed", r.iteration, r.primal_value, r.dual_value, 0.0, r.max_violation});
        }
        const AllocationPlan& candidate = alloc.plan;
        const double cand_value = sum_rate(candidate, ch, sc);
        const double cand_short = detail::total_shortfall(candidate, ch, sc);
        const double current = sum_rate(incumbent, ch, sc);
        const bool fresh = outer == 0 && !warm;
        const double current_short = fresh ? std::numeric_limits<double>::infinity()
                                           : detail::total_shortfall(incumbent, ch, sc);
        const bool better_short = cand_short < current_short - slack;
        const bool same_short = cand_short <= current_short + slack;
        if (fresh || better_short || (same_short && cand_value >= current)) incumbent = candidate;

        if (!detail::trajectory_frozen(scheme)) {
            const auto sca = optimize_trajectory(traj, incumbent, ch, sc, cfg.trajectory);
            for (const auto& r : sca.trace) {
                res.events.push_back(
                    {outer, "trajectory", r.iteration, r.true_value, r.surrogate_value, r.kkt_residual, r.max_violation});
            }
            traj = sca.trajectory;
            ch = rebind(ch, sc, traj);
        }

        const double previous = value;
        value = sum_rate(incumbent, ch, sc);
        shortfall = detail::total_shortfall(incumbent, ch, sc);
        const double violation = check_constraints(incumbent, traj, ch, sc).max_violation();
        res.trace.push_back(value);
        res.trace_violation.push_back(violation);
        res.events.push_back({outer, "outer", outer, value, shortfall, 0.0, violation});
        if (outer > 0 && value - previous <= cfg.outer_tol * std::max(std::abs(previous), 1e-12)) {
            res.converged = true;
            break;
        }
    }

    res.plan = incumbent;
    res.trajectory = traj;
    res.report = check_constraints(incumbent, traj, ch, sc);
    res.sum_rate = value;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

/// Benchmarks use the same alternating driver with the scheme's restrictions.
inline RunResult run_benchmark(Scheme scheme, const Scenario& sc, const RunConfig& cfg) {
    return alternate_optimize(sc, cfg, scheme);
}

inline RunResult run_benchmark(std::string_view scheme, const Scenario& sc, const RunConfig& cfg) {
    return run_benchmark(parse_scheme(scheme), sc, cfg);
}

/// Runs jobs[0..n) on up to `threads` workers. Each job writes only its own slot, so the
/// outcome does not depend on scheduling. The first exception is rethrown.
inline void run_parallel(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            if (failed) return;
            try {
                job(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
}

inline std::vector<RunResult> compare_schemes(const Scenario& sc, const RunConfig& cfg, unsigned threads = 1) {
    std::vector<RunResult> out(kAllSchemes.size());
    run_parallel(out.size(), threads, [&](std::size_t i) { out[i] = alternate_optimize(sc, cfg, kAllSchemes[i]); });
    return out;
}

enum class SweepParam { p_max_unlic, gamma_unlic };

inline std::string_view sweep_param_name(SweepParam p) {
    return p == SweepParam::p_max_unlic ? "p_max_unlic" : "gamma_unlic";
}

inline SweepParam parse_sweep_param(std::string_view name) {
    if (name == "p_max_unlic") return SweepParam::p_max_unlic;
    if (name == "gamma_unlic") return SweepParam::gamma_unlic;
    throw std::invalid_argument("unknown sweep parameter '" + std::string(name) + "'");
}

/// Copy of sc with the swept parameter set (watts); gamma applies to every WU.
inline Scenario with_parameter(const Scenario& sc, SweepParam p, double watts) {
    if (!(watts > 0.0) || !std::isfinite(watts)) throw std::invalid_argument("sweep value must be positive");
    Scenario out = sc;
    if (p == SweepParam::p_max_unlic) {
        out.p_max_unlic_w = watts;
    } else {
        std::fill(out.gamma_unlic_w.begin(), out.gamma_unlic_w.end(), watts);
    }
    return out;
}

struct SweepPoint {
    double value = 0.0;
    std::vector<RunResult> runs;  // one per scheme, in kAllSchemes order
};

/// Runs every scheme at every value; all schemes of a point share the seed. Values must
/// be strictly increasing. Each scheme walks the values in order and starts each point
/// from its solution at the previous one (continuation): a larger budget or threshold
/// keeps that solution feasible, so a scheme's sum rate never drops along the sweep.
/// Schemes run concurrently; the points of one scheme run in sequence.
inline std::vector<SweepPoint> sweep(SweepParam param, const std::vector<double>& values, const Scenario& sc,
                                     const RunConfig& cfg, unsigned threads = 1,
                                     const std::vector<Scheme>& schemes = {kAllSchemes.begin(), kAllSchemes.end()}) {
    for (std::size_t v = 1; v < values.size(); ++v) {
        if (!(values[v] > values[v - 1])) throw std::invalid_argument("sweep values must be strictly increasing");
    }
    std::vector<SweepPoint> out(values.size());
    std::vector<Scenario> scenarios;
    for (std::size_t v = 0; v < values.size(); ++v) {
        out[v].value = values[v];
        out[v].runs.resize(schemes.size());
        scenarios.push_back(with_parameter(sc, param, values[v]));
    }
    run_parallel(schemes.size(), threads, [&](std::size_t s) {
        for (std::size_t v = 0; v < values.size(); ++v) {
            if (v == 0) {
                out[v].runs[s] = alternate_optimize(scenarios[v], cfg, schemes[s]);
            } else {
                const auto& prev = out[v - 1].runs[s];
                const WarmStart warm{prev.trajectory, prev.plan};
                out[v].runs[s] = alternate_optimize(scenarios[v], cfg, schemes[s], &warm);
            }
        }
    });
    return out;
}

}  // namespace airshare
