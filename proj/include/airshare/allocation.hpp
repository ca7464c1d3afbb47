#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "airshare/licensed.hpp"
#include "airshare/unlicensed.hpp"

namespace airshare {

struct AllocationResult {
    AllocationPlan plan;
    std::vector<DualTraceRow> licensed_trace;    // of the first licensed solve
    std::vector<DualTraceRow> unlicensed_trace;  // of the first unlicensed solve
    double value = 0.0;                          // sum rate
    double shortfall = 0.0;                      // summed C1 shortfall
    int band_rounds = 0;                         // extra licensed/unlicensed passes taken
};

inline double rate_shortfall_total(const AllocationPlan& plan, const ChannelRealization& ch, const Scenario& sc) {
    const auto totals = average_rates(plan, ch, sc).total();
    double s = 0.0;
    for (std::size_t k = 0; k < sc.num_sus; ++k) s += std::max(0.0, sc.r_min_bps_hz[k] - totals[k]);
    return s;
}

inline double allocation_merit(const AllocationPlan& plan, const ChannelRealization& ch, const Scenario& sc) {
    return plan_merit(sum_rate(plan, ch, sc), rate_shortfall_total(plan, ch, sc));
}

namespace detail {

/// Licensed rate floors left over once the unlicensed band of `plan` is counted.
inline std::vector<double> licensed_floors(const AllocationPlan& plan, const ChannelRealization& ch,
                                           const Scenario& sc) {
    const auto unl = unlicensed_average_rates(plan, ch, sc);
    std::vector<double> t(sc.num_sus);
    for (std::size_t k = 0; k < sc.num_sus; ++k) t[k] = std::max(0.0, sc.r_min_bps_hz[k] - unl[k]);
    return t;
}

/// Licensed plan with PU subchannel j at step n handed to SU k (or freed when k < 0).
/// When k already holds another subchannel at n, the two owners swap.
inline AllocationPlan move_licensed_slot(const AllocationPlan& plan, std::size_t j, std::size_t n, int k,
                                         const Scenario& sc) {
    AllocationPlan out = plan;
    for (auto& p : out.p_lic.flat()) p = 0.0;
    int owner = -1;
    for (std::size_t i = 0; i < sc.num_sus; ++i) {
        if (out.rho_lic(i, j, n)) owner = static_cast<int>(i);
        out.rho_lic(i, j, n) = 0;
    }
    if (k < 0) return out;
    const auto ku = static_cast<std::size_t>(k);
    for (std::size_t jj = 0; jj < sc.num_pus; ++jj) {
        if (jj != j && out.rho_lic(ku, jj, n)) {
            out.rho_lic(ku, jj, n) = 0;
            if (owner >= 0) out.rho_lic(static_cast<std::size_t>(owner), jj, n) = 1;
        }
    }
    out.rho_lic(ku, j, n) = 1;
    return out;
}

}  // namespace detail

/// Allocation for a fixed trajectory. The licensed band is solved first and the
/// unlicensed band covers the residual rate floors. When some SU has a rate floor the
/// two bands are then re-solved in turn: licensed with the floors the unlicensed band
/// leaves open, unlicensed with the new residuals, while the penalized sum rate improves.
/// A second sequence that starts by asking the licensed band for the full floors is
/// also tried whenever the first licensed pass misses them; the better plan wins.
inline AllocationResult solve_allocation(const Trajectory& traj, const ChannelRealization& ch, const Scenario& sc,
                                         const DualConfig& cfg = {}, bool licensed_only = false,
                                         const std::optional<UnlicensedAssignment>& fixed = std::nullopt,
                                         int max_band_rounds = 4) {
    AllocationResult out;
    const bool floors = std::any_of(sc.r_min_bps_hz.begin(), sc.r_min_bps_hz.end(), [](double r) { return r > 0.0; });

    if (licensed_only) {
        const auto lic = solve_licensed(traj, ch, sc, cfg, sc.r_min_bps_hz);
        out.plan = lic.plan;
        out.licensed_trace = lic.trace;
    } else {
        auto sequence = [&](const std::vector<double>& first_floors, bool record) {
            const auto lic = solve_licensed(traj, ch, sc, cfg, first_floors);
            const auto unl = solve_unlicensed(lic.plan, traj, ch, sc, cfg, fixed);
            if (record) {
                out.licensed_trace = lic.trace;
                out.unlicensed_trace = unl.trace;
            }
            AllocationPlan best = unl.plan;
            double best_merit = allocation_merit(best, ch, sc);
            // Zero residual targets leave the unlicensed band unconstrained, so the bands
            // are decoupled and another pass cannot help.
            const bool coupled = std::any_of(unl.residual_target.begin(), unl.residual_target.end(),
                                             [](double t) { return t > 0.0; });
            int rounds = 0;
            for (; floors && coupled && rounds < max_band_rounds; ++rounds) {
                const auto lic2 = solve_licensed(traj, ch, sc, cfg, detail::licensed_floors(best, ch, sc), &best);
                const auto unl2 = solve_unlicensed(lic2.plan, traj, ch, sc, cfg, fixed);
                const double m = allocation_merit(unl2.plan, ch, sc);
                if (!(m > best_merit + 1e-9)) break;
                best = unl2.plan;
                best_merit = m;
            }
            return std::pair{best, rounds};
        };
        auto [plan, rounds] = sequence({}, true);
        out.plan = plan;
        out.band_rounds = rounds;
        if (floors) {
            const auto lic_rates = licensed_average_rates(plan, ch, sc);
            bool licensed_meets = true;
            for (std::size_t k = 0; k < sc.num_sus; ++k) licensed_meets = licensed_meets && lic_rates[k] >= sc.r_min_bps_hz[k];
            if (!licensed_meets) {
                auto [alt, alt_rounds] = sequence(sc.r_min_bps_hz, false);
                if (allocation_merit(alt, ch, sc) > allocation_merit(out.plan, ch, sc) + 1e-9) {
                    out.plan = alt;
                    out.band_rounds = alt_rounds;
                }
            }
        }
    }
    if (!licensed_only && rate_shortfall_total(out.plan, ch, sc) > kShortfallTol) {
        // Floors still missed: search single licensed owner changes, each followed by a
        // fresh unlicensed solve, until the floors hold or no change helps.
        double best_merit = allocation_merit(out.plan, ch, sc);
        for (int pass = 0; pass < cfg.reassign_passes; ++pass) {
            bool improved = false;
            for (std::size_t n = 0; n < sc.num_steps; ++n) {
                for (std::size_t j = 0; j < sc.num_pus; ++j) {
                    for (int k = -1; k < static_cast<int>(sc.num_sus); ++k) {
                        if (k >= 0 && out.plan.rho_lic(static_cast<std::size_t>(k), j, n)) continue;
                        auto cand = detail::move_licensed_slot(out.plan, j, n, k, sc);
                        cand = detail::refine_licensed(cand, detail::licensed_floors(out.plan, ch, sc), ch, sc);
                        const auto unl = solve_unlicensed(cand, traj, ch, sc, cfg, fixed);
                        const double m = allocation_merit(unl.plan, ch, sc);
                        if (m > best_merit + 1e-9) {
                            best_merit = m;
                            out.plan = unl.plan;
                            improved = true;
                        }
                    }
                }
            }
            if (!improved || rate_shortfall_total(out.plan, ch, sc) <= kShortfallTol) break;
        }
    }
    out.value = sum_rate(out.plan, ch, sc);
    out.shortfall = rate_shortfall_total(out.plan, ch, sc);
    return out;
}

}  // namespace airshare
