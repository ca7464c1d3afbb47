#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "airshare/allocation_common.hpp"
#include "airshare/channel.hpp"
#include "airshare/plan.hpp"
#include "airshare/power_refine.hpp"

namespace airshare {

/// Multipliers of the unlicensed sub-problem: lambda per SU (residual rate target),
/// mu per Wi-Fi subchannel (interference at its WU), nu per step (power budget).
struct UnlicensedDualState {
    std::vector<double> lambda;  // K
    std::vector<double> mu;      // M
    std::vector<double> nu;      // N
    int iteration = 0;
    double a_lambda = 0.1;
    double a_mu = 0.1;
    double a_nu = 0.1;

    double alpha_lambda() const { return step_size(a_lambda, iteration); }
    double alpha_mu() const { return step_size(a_mu, iteration); }
    double alpha_nu() const { return step_size(a_nu, iteration); }
};

inline UnlicensedDualState initial_unlicensed_dual(const Scenario& sc, const DualConfig& cfg = {}) {
    return {std::vector<double>(sc.num_sus, 0.0), std::vector<double>(sc.num_wus, 0.0),
            std::vector<double>(sc.num_steps, 0.0), 0, cfg.step_a3, cfg.step_a1, cfg.step_a2};
}

/// [R_min - (1/N) sum_n R_lic]^+ : what the unlicensed band still has to deliver to SU k.
inline double residual_rate_target(std::size_t k, const AllocationPlan& licensed, const ChannelRealization& ch,
                                   const Scenario& sc) {
    double r = 0.0;
    for (std::size_t n = 0; n < sc.num_steps; ++n) r += licensed_rate(licensed, k, n, ch, sc);
    return std::max(0.0, sc.r_min_bps_hz[k] - r / static_cast<double>(sc.num_steps));
}

/// Stationary point of the per-pair Lagrangian
///   (1 + lambda_k)/N log2(1 + SINR(p)) - (mu_m |h_uw|^2 / N + nu_n) p
/// projected onto [0, P_max^unlic]:
///   p* = [(1 + lambda_k)/N / (ln2 (mu_m |h_uw|^2 / N + nu_n)) - floor / |h_us|^2]^+.
inline double optimal_unlicensed_power(std::size_t k, std::size_t m, std::size_t n,
                                       const UnlicensedDualState& dual, const ChannelRealization& ch,
                                       const Scenario& sc) {
    const double inv_n = 1.0 / static_cast<double>(sc.num_steps);
    const double price = dual.mu[m] * ch.h_uw(m, n) * inv_n + dual.nu[n];
    if (!(price > 0.0)) return sc.p_max_unlic_w;
    const double level = (1.0 + dual.lambda[k]) * inv_n / (std::numbers::ln2 * price);
    const double p = level - unlicensed_floor(k, m, n, ch, sc) / ch.h_us(k, n);
    return std::clamp(p, 0.0, sc.p_max_unlic_w);
}

/// Marginal Lagrangian utility M_{k,m}[n] of giving subchannel m to SU k at power p.
inline double unlicensed_pair_utility(double p, std::size_t k, std::size_t m, std::size_t n,
                                      const UnlicensedDualState& dual, const ChannelRealization& ch,
                                      const Scenario& sc) {
    const double inv_n = 1.0 / static_cast<double>(sc.num_steps);
    const double price = dual.mu[m] * ch.h_uw(m, n) * inv_n + dual.nu[n];
    return (1.0 + dual.lambda[k]) * inv_n * std::log2(1.0 + sinr_unlicensed(p, k, m, n, ch, sc)) - price * p;
}

/// Per-subchannel argmax over SUs at step n (ties to the lowest SU index); -1 when no
/// SU has positive utility. An SU may win several subchannels.
inline std::vector<int> assign_unlicensed(std::size_t n, const UnlicensedDualState& dual,
                                          const ChannelRealization& ch, const Scenario& sc,
                                          std::vector<double>* best_utility = nullptr) {
    std::vector<int> winner(sc.num_wus, -1);
    if (best_utility) best_utility->assign(sc.num_wus, 0.0);
    for (std::size_t m = 0; m < sc.num_wus; ++m) {
        double best = 0.0;
        for (std::size_t k = 0; k < sc.num_sus; ++k) {
            const double u =
                unlicensed_pair_utility(optimal_unlicensed_power(k, m, n, dual, ch, sc), k, m, n, dual, ch, sc);
            if (u > best) {
                best = u;
                winner[m] = static_cast<int>(k);
            }
        }
        if (best_utility) (*best_utility)[m] = best;
    }
    return winner;
}

inline std::vector<double> unlicensed_average_rates(const AllocationPlan& plan, const ChannelRealization& ch,
                                                    const Scenario& sc) {
    std::vector<double> r(sc.num_sus, 0.0);
    for (std::size_t k = 0; k < sc.num_sus; ++k) {
        for (std::size_t n = 0; n < sc.num_steps; ++n) r[k] += unlicensed_rate(plan, k, n, ch, sc);
        r[k] /= static_cast<double>(sc.num_steps);
    }
    return r;
}

/// Projected subgradient step on (lambda, mu, nu) given residual targets.
inline UnlicensedDualState update_unlicensed_multipliers(const UnlicensedDualState& dual,
                                                         const AllocationPlan& plan,
                                                         const std::vector<double>& targets,
                                                         const ChannelRealization& ch, const Scenario& sc,
                                                         MultiplierScaling scaling = MultiplierScaling::normalized) {
    UnlicensedDualState next = dual;
    const bool raw = scaling == MultiplierScaling::raw;
    const auto achieved = unlicensed_average_rates(plan, ch, sc);
    for (std::size_t k = 0; k < sc.num_sus; ++k) {
        next.lambda[k] = std::max(0.0, dual.lambda[k] - dual.alpha_lambda() * (achieved[k] - targets[k]));
    }
    for (std::size_t m = 0; m < sc.num_wus; ++m) {
        const double g = sc.gamma_unlic_w[m] - unlicensed_interference(plan, m, ch, sc);
        next.mu[m] = std::max(0.0, dual.mu[m] - dual.alpha_mu() * scaled_subgradient(g, sc.gamma_unlic_w[m], scaling));
    }
    const double n_steps = static_cast<double>(sc.num_steps);
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        const double g = sc.p_max_unlic_w - unlicensed_step_power(plan, n, sc);
        // nu prices power inside a 1/N-weighted objective, so its natural scale is N * P_max
        next.nu[n] = std::max(0.0, dual.nu[n] - dual.alpha_nu() * scaled_subgradient(g, sc.p_max_unlic_w, scaling) /
                                                   (raw ? 1.0 : n_steps));
    }
    next.iteration = dual.iteration + 1;
    return next;
}

/// Scales unlicensed powers down until C10 and C3 hold.
inline void repair_unlicensed(AllocationPlan& plan, const ChannelRealization& ch, const Scenario& sc) {
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        const double total = unlicensed_step_power(plan, n, sc);
        if (total > sc.p_max_unlic_w) {
            const double f = sc.p_max_unlic_w / total;
            for (std::size_t k = 0; k < sc.num_sus; ++k) {
                for (std::size_t m = 0; m < sc.num_wus; ++m) plan.p_unlic(k, m, n) *= f;
            }
        }
    }
    for (std::size_t m = 0; m < sc.num_wus; ++m) {
        const double inter = unlicensed_interference(plan, m, ch, sc);
        if (inter > sc.gamma_unlic_w[m]) {
            const double f = sc.gamma_unlic_w[m] / inter;
            for (std::size_t k = 0; k < sc.num_sus; ++k) {
                for (std::size_t n = 0; n < sc.num_steps; ++n) plan.p_unlic(k, m, n) *= f;
            }
        }
    }
}

inline double unlicensed_sum_rate(const AllocationPlan& plan, const ChannelRealization& ch, const Scenario& sc) {
    double total = 0.0;
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        for (std::size_t k = 0; k < sc.num_sus; ++k) total += unlicensed_rate(plan, k, n, ch, sc);
    }
    return total / static_cast<double>(sc.num_steps);
}

struct UnlicensedSolution {
    AllocationPlan plan;  // licensed part copied from the input
    UnlicensedDualState dual;
    std::vector<DualTraceRow> trace;
    std::vector<double> residual_target;  // per SU
    std::vector<double> rate_shortfall;   // per SU, R_min minus achieved total rate
    double value = 0.0;                   // unlicensed sum rate of the returned plan
    double best_dual = std::numeric_limits<double>::infinity();
    bool converged = false;
};

namespace detail {

inline void clear_unlicensed(AllocationPlan& plan) {
    for (auto& r : plan.rho_unlic.flat()) r = 0;
    for (auto& p : plan.p_unlic.flat()) p = 0.0;
}

inline double target_shortfall(const AllocationPlan& plan, const std::vector<double>& targets,
                               const ChannelRealization& ch, const Scenario& sc) {
    const auto r = unlicensed_average_rates(plan, ch, sc);
    double s = 0.0;
    for (std::size_t k = 0; k < sc.num_sus; ++k) s += std::max(0.0, targets[k] - r[k]);
    return s;
}

inline AllocationPlan refine_unlicensed(const AllocationPlan& assigned, const std::vector<double>& targets,
                                        const ChannelRealization& ch, const Scenario& sc) {
    PowerProgram prog;
    prog.num_sus = sc.num_sus;
    prog.num_subchannels = sc.num_wus;
    prog.num_steps = sc.num_steps;
    prog.p_max = sc.p_max_unlic_w;
    prog.victim_gain = ch.h_uw;
    prog.gamma = sc.gamma_unlic_w;
    prog.rate_target = targets;
    prog.penalty = kShortfallPenalty;
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        for (std::size_t k = 0; k < sc.num_sus; ++k) {
            for (std::size_t m = 0; m < sc.num_wus; ++m) {
                if (assigned.rho_unlic(k, m, n)) {
                    prog.pairs.push_back({k, m, n, ch.h_us(k, n) / unlicensed_floor(k, m, n, ch, sc)});
                }
            }
        }
    }
    const auto sol = solve_power_program(prog);
    AllocationPlan out = assigned;
    for (std::size_t v = 0; v < prog.pairs.size(); ++v) {
        const auto& pr = prog.pairs[v];
        out.p_unlic(pr.k, pr.sub, pr.n) = sol.power[v];
    }
    repair_unlicensed(out, ch, sc);
    return out;
}

/// First-improvement search over single (subchannel, step) owner changes with the powers
/// re-solved each time. The dual argmax hands near-tied subchannels to one SU as a block,
/// which misses splits that rate floors call for.
inline AllocationPlan reassign_unlicensed(const AllocationPlan& start, const std::vector<double>& targets,
                                          int passes, const ChannelRealization& ch, const Scenario& sc) {
    auto merit = [&](const AllocationPlan& p) {
        return plan_merit(unlicensed_sum_rate(p, ch, sc), target_shortfall(p, targets, ch, sc));
    };
    AllocationPlan best = start;
    double best_merit = merit(best);
    for (int pass = 0; pass < passes; ++pass) {
        bool improved = false;
        for (std::size_t n = 0; n < sc.num_steps; ++n) {
            for (std::size_t m = 0; m < sc.num_wus; ++m) {
                for (std::size_t k = 0; k < sc.num_sus; ++k) {
                    if (best.rho_unlic(k, m, n)) continue;
                    AllocationPlan cand = best;
                    clear_unlicensed(cand);
                    cand.rho_unlic = best.rho_unlic;
                    for (std::size_t i = 0; i < sc.num_sus; ++i) cand.rho_unlic(i, m, n) = 0;
                    cand.rho_unlic(k, m, n) = 1;
                    auto refined = refine_unlicensed(cand, targets, ch, sc);
                    const double mr = merit(refined);
                    if (mr > best_merit + 1e-9) {
                        best_merit = mr;
                        best = std::move(refined);
                        improved = true;
                    }
                }
            }
        }
        if (!improved) break;
    }
    return best;
}

}  // namespace detail

/// Fixed unlicensed assignment, winner SU per (subchannel, step) or -1.
using UnlicensedAssignment = Grid2<int>;

/// Dual method for the unlicensed band given a solved licensed plan. Layer 1 uses the
/// closed-form powers and per-subchannel argmax; Layer 2 updates (lambda, mu, nu). The
/// powers of the best few distinct assignments met are then re-solved exactly. When
/// `fixed` is given the assignment is taken as-is and only the powers are optimized.
inline UnlicensedSolution solve_unlicensed(const AllocationPlan& licensed, const Trajectory& traj,
                                           const ChannelRealization& ch, const Scenario& sc,
                                           const DualConfig& cfg = {},
                                           const std::optional<UnlicensedAssignment>& fixed = std::nullopt) {
    const std::size_t K = sc.num_sus, M = sc.num_wus, N = sc.num_steps;
    UnlicensedSolution out;
    out.dual = initial_unlicensed_dual(sc, cfg);
    out.residual_target.resize(K);
    for (std::size_t k = 0; k < K; ++k) out.residual_target[k] = residual_rate_target(k, licensed, ch, sc);
    const auto& targets = out.residual_target;

    auto merit = [&](const AllocationPlan& p) {
        return plan_merit(unlicensed_sum_rate(p, ch, sc), detail::target_shortfall(p, targets, ch, sc));
    };

    AllocationPlan iterate = licensed;
    detail::clear_unlicensed(iterate);
    out.plan = iterate;
    double best_merit = merit(out.plan);
    double best_rate = 0.0;  // largest repaired rate that meets the targets, for the gap test
    AssignmentPool pool(cfg.refine_pool);

    if (fixed) {
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t n = 0; n < N; ++n) {
                const int k = (*fixed)(m, n);
                if (k >= 0) iterate.rho_unlic(static_cast<std::size_t>(k), m, n) = 1;
            }
        }
        out.plan = detail::refine_unlicensed(iterate, targets, ch, sc);
        out.converged = true;
    } else {
        for (int it = 0; it < cfg.max_dual_iters; ++it) {
            const auto& dual = out.dual;
            detail::clear_unlicensed(iterate);
            double layer1 = 0.0;
            std::vector<double> best_u;
            for (std::size_t n = 0; n < N; ++n) {
                const auto winner = assign_unlicensed(n, dual, ch, sc, &best_u);
                for (std::size_t m = 0; m < M; ++m) {
                    layer1 += best_u[m];
                    if (winner[m] < 0) continue;
                    const auto k = static_cast<std::size_t>(winner[m]);
                    iterate.rho_unlic(k, m, n) = 1;
                    iterate.p_unlic(k, m, n) = optimal_unlicensed_power(k, m, n, dual, ch, sc);
                }
            }
            double dual_value = layer1;
            for (std::size_t n = 0; n < N; ++n) dual_value += dual.nu[n] * sc.p_max_unlic_w;
            for (std::size_t m = 0; m < M; ++m) dual_value += dual.mu[m] * sc.gamma_unlic_w[m];
            for (std::size_t k = 0; k < K; ++k) dual_value -= dual.lambda[k] * targets[k];
            out.best_dual = std::min(out.best_dual, dual_value);

            DualTraceRow row{it, dual_value, 0.0, 0.0};
            {
                const auto rep = check_constraints(iterate, traj, ch, sc);
                row.max_violation = std::max(rep.c3, rep.c10);
            }
            AllocationPlan repaired = iterate;
            repair_unlicensed(repaired, ch, sc);
            row.primal_value = unlicensed_sum_rate(repaired, ch, sc);
            const double mr = merit(repaired);
            if (mr > best_merit) {
                best_merit = mr;
                out.plan = repaired;
            }
            if (mr >= row.primal_value - 1e-12) best_rate = std::max(best_rate, row.primal_value);
            pool.offer(iterate.rho_unlic, mr);
            out.trace.push_back(row);

            const auto next = update_unlicensed_multipliers(dual, iterate, targets, ch, sc, cfg.scaling);
            const bool raw = cfg.scaling == MultiplierScaling::raw;
            double change = 0.0;
            for (std::size_t k = 0; k < K; ++k) change = std::max(change, std::abs(next.lambda[k] - dual.lambda[k]));
            for (std::size_t m = 0; m < M; ++m) {
                change = std::max(change, std::abs(next.mu[m] - dual.mu[m]) * (raw ? 1.0 : sc.gamma_unlic_w[m]));
            }
            for (std::size_t n = 0; n < N; ++n) {
                const double s = raw ? 1.0 : static_cast<double>(N) * sc.p_max_unlic_w;
                change = std::max(change, std::abs(next.nu[n] - dual.nu[n]) * s);
            }
            out.dual = next;
            if (it > 0 && (change < cfg.tol_dual || gap_closed(out.best_dual, best_rate, cfg.tol_gap))) {
                out.converged = true;
                break;
            }
        }
        if (cfg.refine_powers) {
            for (const auto& entry : pool.entries()) {
                AllocationPlan cand = iterate;
                detail::clear_unlicensed(cand);
                cand.rho_unlic = entry.second;
                const auto refined = detail::refine_unlicensed(cand, targets, ch, sc);
                const double mr = merit(refined);
                if (mr > best_merit) {
                    best_merit = mr;
                    out.plan = refined;
                }
            }
            const bool floors = std::any_of(targets.begin(), targets.end(), [](double t) { return t > 0.0; });
            if (floors) out.plan = detail::reassign_unlicensed(out.plan, targets, cfg.reassign_passes, ch, sc);
        }
    }

    out.value = unlicensed_sum_rate(out.plan, ch, sc);
    const auto totals = average_rates(out.plan, ch, sc).total();
    out.rate_shortfall.resize(K);
    for (std::size_t k = 0; k < K; ++k) out.rate_shortfall[k] = std::max(0.0, sc.r_min_bps_hz[k] - totals[k]);
    return out;
}

}  // namespace airshare
