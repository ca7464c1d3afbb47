#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "airshare/allocation_common.hpp"
#include "airshare/channel.hpp"
#include "airshare/hungarian.hpp"
#include "airshare/plan.hpp"
#include "airshare/power_refine.hpp"

namespace airshare {

/// Multipliers of the licensed sub-problem: omega per subchannel (interference limit
/// at its PU) and theta per step (licensed power budget). lambda per SU prices optional
/// licensed rate floors and stays zero when none are given.
struct LicensedDualState {
    std::vector<double> omega;   // J
    std::vector<double> theta;   // N
    std::vector<double> lambda;  // K
    int iteration = 0;
    double a1 = 0.1;
    double a2 = 0.1;
    double a3 = 0.1;

    double alpha1() const { return step_size(a1, iteration); }
    double alpha2() const { return step_size(a2, iteration); }
    double alpha3() const { return step_size(a3, iteration); }
};

inline LicensedDualState initial_licensed_dual(const Scenario& sc, const DualConfig& cfg = {}) {
    return {std::vector<double>(sc.num_pus, 0.0),
            std::vector<double>(sc.num_steps, 0.0),
            std::vector<double>(sc.num_sus, 0.0),
            0,
            cfg.step_a1,
            cfg.step_a2,
            cfg.step_a3};
}

inline double licensed_weight(const LicensedDualState& dual, std::size_t k) {
    return dual.lambda.empty() ? 1.0 : 1.0 + dual.lambda[k];
}

/// Water-filling power of SU k on licensed subchannel j at step n:
///   [w_k / (ln2 (omega_j |h_up|^2 + theta_n)) - floor / |h_us|^2]^+, capped at P_max^lic,
/// with rate weight w_k = 1 + lambda_k (1 without rate floors).
/// With both multipliers zero the water level is unbounded and the cap applies.
inline double optimal_licensed_power(std::size_t k, std::size_t j, std::size_t n, const LicensedDualState& dual,
                                     const ChannelRealization& ch, const Scenario& sc) {
    const double price = dual.omega[j] * ch.h_up(j, n) + dual.theta[n];
    if (!(price > 0.0)) return sc.p_max_lic_w;
    const double level = licensed_weight(dual, k) / (std::numbers::ln2 * price);
    const double p = level - licensed_floor(k, j, n, ch, sc) / ch.h_us(k, n);
    return std::clamp(p, 0.0, sc.p_max_lic_w);
}

/// Per-pair Lagrangian value at power p: weighted rate minus priced interference and power.
inline double licensed_pair_utility(double p, std::size_t k, std::size_t j, std::size_t n,
                                    const LicensedDualState& dual, const ChannelRealization& ch,
                                    const Scenario& sc) {
    const double price = dual.omega[j] * ch.h_up(j, n) + dual.theta[n];
    return licensed_weight(dual, k) * std::log2(1.0 + sinr_licensed(p, k, j, n, ch, sc)) - price * p;
}

/// Utility matrix U[k][j] at the water-filling powers for step n.
inline Grid2<double> licensed_utility_matrix(std::size_t n, const LicensedDualState& dual,
                                             const ChannelRealization& ch, const Scenario& sc) {
    Grid2<double> u(sc.num_sus, sc.num_pus);
    for (std::size_t k = 0; k < sc.num_sus; ++k) {
        for (std::size_t j = 0; j < sc.num_pus; ++j) {
            u(k, j) = licensed_pair_utility(optimal_licensed_power(k, j, n, dual, ch, sc), k, j, n, dual, ch, sc);
        }
    }
    return u;
}

/// Hungarian assignment of SUs to licensed subchannels at step n (row k -> column j).
inline Assignment assign_licensed(std::size_t n, const LicensedDualState& dual, const ChannelRealization& ch,
                                  const Scenario& sc) {
    return max_utility_assignment(licensed_utility_matrix(n, dual, ch, sc));
}

inline std::vector<double> licensed_average_rates(const AllocationPlan& plan, const ChannelRealization& ch,
                                                  const Scenario& sc) {
    std::vector<double> r(sc.num_sus, 0.0);
    for (std::size_t k = 0; k < sc.num_sus; ++k) {
        for (std::size_t n = 0; n < sc.num_steps; ++n) r[k] += licensed_rate(plan, k, n, ch, sc);
        r[k] /= static_cast<double>(sc.num_steps);
    }
    return r;
}

/// Projected subgradient step on omega, theta and (when targets are given) lambda;
/// advances the iteration counter.
inline LicensedDualState update_licensed_multipliers(const LicensedDualState& dual, const AllocationPlan& plan,
                                                     const ChannelRealization& ch, const Scenario& sc,
                                                     MultiplierScaling scaling = MultiplierScaling::normalized,
                                                     const std::vector<double>& targets = {}) {
    LicensedDualState next = dual;
    const double a1 = dual.alpha1(), a2 = dual.alpha2();
    for (std::size_t j = 0; j < sc.num_pus; ++j) {
        const double g = sc.gamma_lic_w[j] - licensed_interference(plan, j, ch, sc);
        next.omega[j] = std::max(0.0, dual.omega[j] - a1 * scaled_subgradient(g, sc.gamma_lic_w[j], scaling));
    }
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        const double g = sc.p_max_lic_w - licensed_step_power(plan, n, sc);
        next.theta[n] = std::max(0.0, dual.theta[n] - a2 * scaled_subgradient(g, sc.p_max_lic_w, scaling));
    }
    if (!targets.empty()) {
        const auto achieved = licensed_average_rates(plan, ch, sc);
        for (std::size_t k = 0; k < sc.num_sus; ++k) {
            next.lambda[k] = std::max(0.0, dual.lambda[k] - dual.alpha3() * (achieved[k] - targets[k]));
        }
    }
    next.iteration = dual.iteration + 1;
    return next;
}

/// Scales powers down until the per-step budget (C9) and the time-averaged PU
/// interference limits (C2) hold. Scaling a subchannel never breaks a step budget.
inline void repair_licensed(AllocationPlan& plan, const ChannelRealization& ch, const Scenario& sc) {
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        const double total = licensed_step_power(plan, n, sc);
        if (total > sc.p_max_lic_w) {
            const double f = sc.p_max_lic_w / total;
            for (std::size_t k = 0; k < sc.num_sus; ++k) {
                for (std::size_t j = 0; j < sc.num_pus; ++j) plan.p_lic(k, j, n) *= f;
            }
        }
    }
    for (std::size_t j = 0; j < sc.num_pus; ++j) {
        const double inter = licensed_interference(plan, j, ch, sc);
        if (inter > sc.gamma_lic_w[j]) {
            const double f = sc.gamma_lic_w[j] / inter;
            for (std::size_t k = 0; k < sc.num_sus; ++k) {
                for (std::size_t n = 0; n < sc.num_steps; ++n) plan.p_lic(k, j, n) *= f;
            }
        }
    }
}

/// Licensed band only: (1/N) sum of licensed rates.
inline double licensed_sum_rate(const AllocationPlan& plan, const ChannelRealization& ch, const Scenario& sc) {
    double total = 0.0;
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        for (std::size_t k = 0; k < sc.num_sus; ++k) total += licensed_rate(plan, k, n, ch, sc);
    }
    return total / static_cast<double>(sc.num_steps);
}

struct LicensedSolution {
    AllocationPlan plan;  // unlicensed part copied from `base` (empty without one)
    LicensedDualState dual;
    std::vector<DualTraceRow> trace;
    std::vector<double> target;     // licensed rate floors used (empty when none)
    double value = 0.0;             // licensed sum rate of the returned plan
    double shortfall = 0.0;         // summed shortfall against the floors
    double best_dual = std::numeric_limits<double>::infinity();
    bool converged = false;
};

namespace detail {

inline void clear_licensed(AllocationPlan& plan) {
    for (auto& r : plan.rho_lic.flat()) r = 0;
    for (auto& p : plan.p_lic.flat()) p = 0.0;
}

inline double floor_shortfall(const std::vector<double>& achieved, const std::vector<double>& targets) {
    double s = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) s += std::max(0.0, targets[k] - achieved[k]);
    return s;
}

/// Re-solves the powers of a fixed licensed assignment exactly.
inline AllocationPlan refine_licensed(const AllocationPlan& assigned, const std::vector<double>& targets,
                                      const ChannelRealization& ch, const Scenario& sc) {
    PowerProgram prog;
    prog.num_sus = sc.num_sus;
    prog.num_subchannels = sc.num_pus;
    prog.num_steps = sc.num_steps;
    prog.p_max = sc.p_max_lic_w;
    prog.victim_gain = ch.h_up;
    prog.gamma = sc.gamma_lic_w;
    prog.rate_target = targets;
    prog.penalty = kShortfallPenalty;
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        for (std::size_t k = 0; k < sc.num_sus; ++k) {
            for (std::size_t j = 0; j < sc.num_pus; ++j) {
                if (assigned.rho_lic(k, j, n)) {
                    prog.pairs.push_back({k, j, n, ch.h_us(k, n) / licensed_floor(k, j, n, ch, sc)});
                }
            }
        }
    }
    const auto sol = solve_power_program(prog);
    AllocationPlan out = assigned;
    for (std::size_t v = 0; v < prog.pairs.size(); ++v) {
        const auto& pr = prog.pairs[v];
        out.p_lic(pr.k, pr.sub, pr.n) = sol.power[v];
    }
    repair_licensed(out, ch, sc);
    return out;
}

}  // namespace detail

/// Two-layer dual decomposition for the licensed band. Layer 1 computes water-filling
/// powers and a Hungarian assignment per step; Layer 2 moves the multipliers along the
/// subgradient. `base` supplies the unlicensed part carried through unchanged. Optional
/// per-SU licensed rate floors are priced by lambda and met through an exact penalty.
/// The best repaired iterates are kept, and (by default) the powers of the best few
/// distinct assignments are re-solved exactly before returning.
inline LicensedSolution solve_licensed(const Trajectory& traj, const ChannelRealization& ch, const Scenario& sc,
                                       const DualConfig& cfg = {}, const std::vector<double>& targets = {},
                                       const AllocationPlan* base = nullptr) {
    const std::size_t K = sc.num_sus, J = sc.num_pus, N = sc.num_steps;
    const bool has_targets = std::any_of(targets.begin(), targets.end(), [](double t) { return t > 0.0; });
    const std::vector<double> floors = has_targets ? targets : std::vector<double>{};
    LicensedSolution out;
    out.target = floors;
    out.dual = initial_licensed_dual(sc, cfg);

    auto merit = [&](const AllocationPlan& p) {
        const double r = licensed_sum_rate(p, ch, sc);
        return has_targets ? plan_merit(r, detail::floor_shortfall(licensed_average_rates(p, ch, sc), floors)) : r;
    };

    AllocationPlan iterate = base ? *base : AllocationPlan::empty(sc);
    detail::clear_licensed(iterate);
    out.plan = iterate;
    double best_merit = merit(out.plan);
    double best_rate = 0.0;  // largest repaired rate that meets the floors, for the gap test
    AssignmentPool pool(cfg.refine_pool);

    for (int it = 0; it < cfg.max_dual_iters; ++it) {
        const auto& dual = out.dual;
        detail::clear_licensed(iterate);
        double layer1 = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const auto a = max_utility_assignment(licensed_utility_matrix(n, dual, ch, sc));
            layer1 += a.total;
            for (std::size_t k = 0; k < K; ++k) {
                if (a.row_to_col[k] < 0) continue;
                const auto j = static_cast<std::size_t>(a.row_to_col[k]);
                iterate.rho_lic(k, j, n) = 1;
                iterate.p_lic(k, j, n) = optimal_licensed_power(k, j, n, dual, ch, sc);
            }
        }
        double dual_value = layer1;
        for (std::size_t n = 0; n < N; ++n) dual_value += dual.theta[n] * sc.p_max_lic_w;
        for (std::size_t j = 0; j < J; ++j) dual_value += static_cast<double>(N) * dual.omega[j] * sc.gamma_lic_w[j];
        dual_value /= static_cast<double>(N);
        for (std::size_t k = 0; k < floors.size(); ++k) dual_value -= dual.lambda[k] * floors[k];
        out.best_dual = std::min(out.best_dual, dual_value);

        DualTraceRow row{it, dual_value, 0.0, 0.0};
        {
            const auto rep = check_constraints(iterate, traj, ch, sc);
            row.max_violation = std::max(rep.c2, rep.c9);
        }
        AllocationPlan repaired = iterate;
        repair_licensed(repaired, ch, sc);
        row.primal_value = licensed_sum_rate(repaired, ch, sc);
        const double mr = merit(repaired);
        if (mr > best_merit) {
            best_merit = mr;
            out.plan = repaired;
        }
        if (mr >= row.primal_value - 1e-12) best_rate = std::max(best_rate, row.primal_value);
        pool.offer(iterate.rho_lic, mr);
        out.trace.push_back(row);

        const auto next = update_licensed_multipliers(dual, iterate, ch, sc, cfg.scaling, floors);
        const bool raw = cfg.scaling == MultiplierScaling::raw;
        double change = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            change = std::max(change, std::abs(next.omega[j] - dual.omega[j]) * (raw ? 1.0 : sc.gamma_lic_w[j]));
        }
        for (std::size_t n = 0; n < N; ++n) {
            change = std::max(change, std::abs(next.theta[n] - dual.theta[n]) * (raw ? 1.0 : sc.p_max_lic_w));
        }
        for (std::size_t k = 0; k < K; ++k) change = std::max(change, std::abs(next.lambda[k] - dual.lambda[k]));
        out.dual = next;
        if (it > 0 && (change < cfg.tol_dual || gap_closed(out.best_dual, best_rate, cfg.tol_gap))) {
            out.converged = true;
            break;
        }
    }

    if (cfg.refine_powers) {
        for (const auto& entry : pool.entries()) {
            AllocationPlan cand = iterate;
            detail::clear_licensed(cand);
            cand.rho_lic = entry.second;
            const auto refined = detail::refine_licensed(cand, floors, ch, sc);
            const double mr = merit(refined);
            if (mr > best_merit) {
                best_merit = mr;
                out.plan = refined;
            }
        }
    }
    out.value = licensed_sum_rate(out.plan, ch, sc);
    if (has_targets) out.shortfall = detail::floor_shortfall(licensed_average_rates(out.plan, ch, sc), floors);
    return out;
}

}  // namespace airshare
