#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "airshare/barrier.hpp"
#include "airshare/channel.hpp"
#include "airshare/plan.hpp"

namespace airshare {

struct TrajectoryConfig {
    int max_sca_iters = 30;
    double sca_tol = 1e-5;      // relative improvement of the true sum rate
    double kkt_tol = 1e-6;
    double penalty = 1e3;       // exact penalty on the C1 shortfall slack
    double accept_slack = 1e-9;
};

/// Iterate of the SCA loop. xi_* hold the linearized squared distances of the accepted
/// point, which never exceed the true squared distances.
struct ScaState {
    Trajectory q;
    Grid2<double> xi_cell;  // J x N
    Grid2<double> xi_wifi;  // M x N
    int iteration = 0;
    double surrogate_value = 0.0;
    double true_value = 0.0;
};

struct ScaTraceRow {
    int iteration = 0;
    double surrogate_value = 0.0;
    double true_value = 0.0;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
};

/// First-order lower bound on |q - w|^2 around q_i.
inline double linearize_distance(Vec2 q, Vec2 q_i, Vec2 w) {
    return norm2(q_i - w) + 2.0 * dot(q_i - w, q - q_i);
}

namespace detail {

/// Gain factors a = beta0 * fading * p / floor of every active pair of SU k at step n,
/// so that the pair's rate is log2(1 + a (H^2 + |q - w_k|^2)^(-phi/2)).
inline std::vector<double> active_factors(std::size_t k, std::size_t n, const AllocationPlan& plan,
                                          const ChannelRealization& ch, const Scenario& sc) {
    std::vector<double> a;
    const double base = sc.beta0 * ch.fading.us(k, n);
    for (std::size_t j = 0; j < sc.num_pus; ++j) {
        if (plan.rho_lic(k, j, n) && plan.p_lic(k, j, n) > 0.0) {
            a.push_back(base * plan.p_lic(k, j, n) / licensed_floor(k, j, n, ch, sc));
        }
    }
    for (std::size_t m = 0; m < sc.num_wus; ++m) {
        if (plan.rho_unlic(k, m, n) && plan.p_unlic(k, m, n) > 0.0) {
            a.push_back(base * plan.p_unlic(k, m, n) / unlicensed_floor(k, m, n, ch, sc));
        }
    }
    return a;
}

/// Value and z-derivative of log2(1 + a (H^2 + z)^(-phi/2)), convex and decreasing in z.
struct RateInZ {
    double value = 0.0;
    double slope = 0.0;
};

inline RateInZ rate_in_z(double a, double z, const Scenario& sc) {
    const double h2 = sc.uav_height_m * sc.uav_height_m;
    const double g = a * std::pow(h2 + z, -0.5 * sc.path_loss_exp);
    return {std::log2(1.0 + g), -0.5 * sc.path_loss_exp * g / ((h2 + z) * std::numbers::ln2 * (1.0 + g))};
}

/// Surrogate of SU k at step n expanded at z_i: value A + B (z - z_i) with B <= 0.
struct SurrogateCoeff {
    double value = 0.0;
    double slope = 0.0;
    double z_i = 0.0;
};

inline SurrogateCoeff surrogate_coeff(std::size_t k, std::size_t n, Vec2 q_i, const AllocationPlan& plan,
                                      const ChannelRealization& ch, const Scenario& sc) {
    SurrogateCoeff c;
    c.z_i = norm2(q_i - sc.su_pos[k]);
    for (double a : active_factors(k, n, plan, ch, sc)) {
        const auto r = rate_in_z(a, c.z_i, sc);
        c.value += r.value;
        c.slope += r.slope;
    }
    return c;
}

}  // namespace detail

/// Rate of SU k at step n if the UAV were at q (both bands, fading frozen).
inline double rate_at(std::size_t k, std::size_t n, Vec2 q, const AllocationPlan& plan,
                      const ChannelRealization& ch, const Scenario& sc) {
    double r = 0.0;
    const double z = norm2(q - sc.su_pos[k]);
    for (double a : detail::active_factors(k, n, plan, ch, sc)) r += detail::rate_in_z(a, z, sc).value;
    return r;
}

/// Concave-in-q lower bound on rate_at(k, n, q) built at q_i. Each pair's rate is convex
/// in the squared distance z, so its tangent in z lies below it; the tangent has a
/// negative slope and z is convex in q, which makes the bound concave in q.
inline double surrogate_rate(std::size_t k, std::size_t n, Vec2 q, Vec2 q_i, const AllocationPlan& plan,
                             const ChannelRealization& ch, const Scenario& sc) {
    const auto c = detail::surrogate_coeff(k, n, q_i, plan, ch, sc);
    return c.value + c.slope * (norm2(q - sc.su_pos[k]) - c.z_i);
}

namespace detail {

/// Interference victim (PU or WU) of the trajectory sub-problem.
struct Victim {
    Vec2 pos;
    double gamma = 0.0;
    std::vector<double> coeff;  // beta0 * fading * allocated power, per step
};

inline std::vector<Victim> collect_victims(const AllocationPlan& plan, const ChannelRealization& ch,
                                           const Scenario& sc) {
    std::vector<Victim> out;
    const std::size_t N = sc.num_steps;
    for (std::size_t j = 0; j < sc.num_pus; ++j) {
        Victim v{sc.pu_pos[j], sc.gamma_lic_w[j], std::vector<double>(N, 0.0)};
        bool any = false;
        for (std::size_t n = 0; n < N; ++n) {
            double p = 0.0;
            for (std::size_t k = 0; k < sc.num_sus; ++k) p += plan.rho_lic(k, j, n) * plan.p_lic(k, j, n);
            v.coeff[n] = sc.beta0 * ch.fading.up(j, n) * p;
            any = any || p > 0.0;
        }
        if (any) out.push_back(std::move(v));
    }
    for (std::size_t m = 0; m < sc.num_wus; ++m) {
        Victim v{sc.wu_pos[m], sc.gamma_unlic_w[m], std::vector<double>(N, 0.0)};
        bool any = false;
        for (std::size_t n = 0; n < N; ++n) {
            double p = 0.0;
            for (std::size_t k = 0; k < sc.num_sus; ++k) p += plan.rho_unlic(k, m, n) * plan.p_unlic(k, m, n);
            v.coeff[n] = sc.beta0 * ch.fading.uw(m, n) * p;
            any = any || p > 0.0;
        }
        if (any) out.push_back(std::move(v));
    }
    return out;
}

/// Convex sub-problem over the free waypoints plus one shortfall slack per SU with a rate
/// requirement. Slack distances are eliminated by their linearized bounds.
class TrajectoryBarrier {
public:
    TrajectoryBarrier(const Trajectory& q_i, const AllocationPlan& plan, const ChannelRealization& ch,
                      const Scenario& sc, double penalty)
        : sc_(sc), q_i_(q_i), penalty_(penalty) {
        const std::size_t N = sc.num_steps, K = sc.num_sus;
        inv_n_ = 1.0 / static_cast<double>(N);
        var_.assign(N, -1);
        const bool pinned = sc.q_start && sc.q_end;
        Eigen::Index next = 0;
        for (std::size_t n = 0; n < N; ++n) {
            if (pinned && (n == 0 || n + 1 == N)) continue;
            var_[n] = next;
            next += 2;
        }
        free_dims_ = next;
        coeff_ = Grid2<SurrogateCoeff>(K, N);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t n = 0; n < N; ++n) coeff_(k, n) = surrogate_coeff(k, n, q_i.q[n], plan, ch, sc);
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (sc.r_min_bps_hz[k] > 0.0) targeted_.push_back(k);
        }
        victims_ = collect_victims(plan, ch, sc);
        for (std::size_t n = 1; n < N; ++n) {
            if (var_[n] >= 0 || var_[n - 1] >= 0) speed_pairs_.push_back(n);
        }
        step2_ = sc.max_step_m() * sc.max_step_m();
    }

    Eigen::Index dimension() const { return free_dims_ + static_cast<Eigen::Index>(targeted_.size()); }
    Eigen::Index constraint_count() const {
        return static_cast<Eigen::Index>(victims_.size() + speed_pairs_.size() + 2 * targeted_.size());
    }
    Eigen::Index free_dims() const { return free_dims_; }

    Vec2 point(const VectorXd& x, std::size_t n) const {
        if (var_[n] < 0) return q_i_.q[n];
        return {x[var_[n]], x[var_[n] + 1]};
    }

    Trajectory trajectory(const VectorXd& x) const {
        Trajectory t;
        t.q.resize(sc_.num_steps);
        for (std::size_t n = 0; n < sc_.num_steps; ++n) t.q[n] = point(x, n);
        return t;
    }

    VectorXd start_point() const {
        VectorXd x(dimension());
        for (std::size_t n = 0; n < sc_.num_steps; ++n) {
            if (var_[n] < 0) continue;
            x[var_[n]] = q_i_.q[n].x;
            x[var_[n] + 1] = q_i_.q[n].y;
        }
        for (std::size_t t = 0; t < targeted_.size(); ++t) {
            const std::size_t k = targeted_[t];
            const double r = sc_.r_min_bps_hz[k];
            x[free_dims_ + static_cast<Eigen::Index>(t)] =
                std::max(0.0, r - su_surrogate(x, k)) + 0.5 * std::max(r, 1.0);
        }
        return x;
    }

    /// (1/N) sum_n surrogate of SU k.
    double su_surrogate(const VectorXd& x, std::size_t k) const {
        double s = 0.0;
        for (std::size_t n = 0; n < sc_.num_steps; ++n) {
            const auto& c = coeff_(k, n);
            s += c.value + c.slope * (norm2(point(x, n) - sc_.su_pos[k]) - c.z_i);
        }
        return s * inv_n_;
    }

    double surrogate_sum(const VectorXd& x) const {
        double s = 0.0;
        for (std::size_t k = 0; k < sc_.num_sus; ++k) s += su_surrogate(x, k);
        return s;
    }

    double objective(const VectorXd& x, VectorXd* grad, MatrixXd* hess) const {
        double f = -surrogate_sum(x);
        for (std::size_t t = 0; t < targeted_.size(); ++t) f += penalty_ * x[free_dims_ + static_cast<Eigen::Index>(t)];
        if (grad) {
            grad->setZero(dimension());
            for (std::size_t t = 0; t < targeted_.size(); ++t) (*grad)[free_dims_ + static_cast<Eigen::Index>(t)] = penalty_;
        }
        if (hess) hess->setZero(dimension(), dimension());
        for (std::size_t n = 0; n < sc_.num_steps; ++n) {
            const Eigen::Index i = var_[n];
            if (i < 0) continue;
            const Vec2 q = point(x, n);
            for (std::size_t k = 0; k < sc_.num_sus; ++k) {
                const double b = coeff_(k, n).slope * inv_n_;
                const Vec2 d = q - sc_.su_pos[k];
                if (grad) {
                    (*grad)[i] -= 2.0 * b * d.x;
                    (*grad)[i + 1] -= 2.0 * b * d.y;
                }
                if (hess) {
                    (*hess)(i, i) -= 2.0 * b;
                    (*hess)(i + 1, i + 1) -= 2.0 * b;
                }
            }
        }
        return f;
    }

    void constraints(const VectorXd& x, VectorXd& val, MatrixXd* jac) const {
        val.resize(constraint_count());
        const double h2 = sc_.uav_height_m * sc_.uav_height_m;
        const double e = 0.5 * sc_.path_loss_exp;
        Eigen::Index row = 0;
        for (const auto& v : victims_) {
            const double scale = inv_n_ / v.gamma;
            double s = 0.0;
            bool inside = true;
            for (std::size_t n = 0; n < sc_.num_steps; ++n) {
                if (v.coeff[n] == 0.0) continue;
                const Vec2 gi = q_i_.q[n] - v.pos;
                const double base = h2 + linearize_distance(point(x, n), q_i_.q[n], v.pos);
                if (!(base > 0.0)) {
                    inside = false;
                    break;
                }
                s += v.coeff[n] * std::pow(base, -e);
                if (jac && var_[n] >= 0) {
                    const double d = -e * v.coeff[n] * std::pow(base, -e - 1.0) * scale * 2.0;
                    (*jac)(row, var_[n]) = d * gi.x;
                    (*jac)(row, var_[n] + 1) = d * gi.y;
                }
            }
            val[row++] = inside ? s * scale - 1.0 : std::numeric_limits<double>::infinity();
        }
        for (std::size_t n : speed_pairs_) {
            const Vec2 d = point(x, n) - point(x, n - 1);
            val[row] = norm2(d) / step2_ - 1.0;
            if (jac) {
                if (var_[n] >= 0) {
                    (*jac)(row, var_[n]) = 2.0 * d.x / step2_;
                    (*jac)(row, var_[n] + 1) = 2.0 * d.y / step2_;
                }
                if (var_[n - 1] >= 0) {
                    (*jac)(row, var_[n - 1]) = -2.0 * d.x / step2_;
                    (*jac)(row, var_[n - 1] + 1) = -2.0 * d.y / step2_;
                }
            }
            ++row;
        }
        for (std::size_t t = 0; t < targeted_.size(); ++t) {
            const std::size_t k = targeted_[t];
            const double r = sc_.r_min_bps_hz[k];
            const double scale = 1.0 / std::max(r, 1.0);
            const Eigen::Index si = free_dims_ + static_cast<Eigen::Index>(t);
            val[row] = scale * (r - su_surrogate(x, k) - x[si]);
            if (jac) {
                for (std::size_t n = 0; n < sc_.num_steps; ++n) {
                    if (var_[n] < 0) continue;
                    const double b = coeff_(k, n).slope * inv_n_;
                    const Vec2 d = point(x, n) - sc_.su_pos[k];
                    (*jac)(row, var_[n]) = -scale * 2.0 * b * d.x;
                    (*jac)(row, var_[n] + 1) = -scale * 2.0 * b * d.y;
                }
                (*jac)(row, si) = -scale;
            }
            ++row;
            val[row] = -x[si];
            if (jac) (*jac)(row, si) = -1.0;
            ++row;
        }
    }

    void add_constraint_curvature(const VectorXd& x, const VectorXd& w, MatrixXd& H) const {
        const double h2 = sc_.uav_height_m * sc_.uav_height_m;
        const double e = 0.5 * sc_.path_loss_exp;
        Eigen::Index row = 0;
        for (const auto& v : victims_) {
            const double scale = inv_n_ / v.gamma;
            for (std::size_t n = 0; n < sc_.num_steps; ++n) {
                const Eigen::Index i = var_[n];
                if (v.coeff[n] == 0.0 || i < 0) continue;
                const Vec2 gi = q_i_.q[n] - v.pos;
                const double base = h2 + linearize_distance(point(x, n), q_i_.q[n], v.pos);
                const double c = w[row] * scale * e * (e + 1.0) * v.coeff[n] * std::pow(base, -e - 2.0) * 4.0;
                H(i, i) += c * gi.x * gi.x;
                H(i, i + 1) += c * gi.x * gi.y;
                H(i + 1, i) += c * gi.x * gi.y;
                H(i + 1, i + 1) += c * gi.y * gi.y;
            }
            ++row;
        }
        for (std::size_t n : speed_pairs_) {
            const double c = 2.0 * w[row] / step2_;
            for (const Eigen::Index a : {var_[n], var_[n - 1]}) {
                if (a < 0) continue;
                H(a, a) += c;
                H(a + 1, a + 1) += c;
            }
            if (var_[n] >= 0 && var_[n - 1] >= 0) {
                for (int d = 0; d < 2; ++d) {
                    H(var_[n] + d, var_[n - 1] + d) -= c;
                    H(var_[n - 1] + d, var_[n] + d) -= c;
                }
            }
            ++row;
        }
        for (std::size_t t = 0; t < targeted_.size(); ++t) {
            const std::size_t k = targeted_[t];
            const double scale = 1.0 / std::max(sc_.r_min_bps_hz[k], 1.0);
            for (std::size_t n = 0; n < sc_.num_steps; ++n) {
                const Eigen::Index i = var_[n];
                if (i < 0) continue;
                const double c = -w[row] * scale * 2.0 * coeff_(k, n).slope * inv_n_;
                H(i, i) += c;
                H(i + 1, i + 1) += c;
            }
            row += 2;
        }
    }

    /// Linearized squared distances to a victim position at the point x.
    double linearized(const VectorXd& x, std::size_t n, Vec2 w) const {
        return linearize_distance(point(x, n), q_i_.q[n], w);
    }

private:
    const Scenario& sc_;
    Trajectory q_i_;
    double penalty_;
    double inv_n_ = 1.0;
    double step2_ = 1.0;
    std::vector<Eigen::Index> var_;
    Eigen::Index free_dims_ = 0;
    Grid2<SurrogateCoeff> coeff_;
    std::vector<std::size_t> targeted_;
    std::vector<Victim> victims_;
    std::vector<std::size_t> speed_pairs_;
};

}  // namespace detail

struct ConvexStep {
    ScaState state;
    double kkt_residual = 0.0;
    bool solved = false;  // false when no strictly feasible point was found; q is then unchanged
};

/// Maximizes the surrogate sum rate built at state.q under the linearized interference
/// limits, the speed limit and the relaxed rate requirements.
inline ConvexStep solve_convex_subproblem(const ScaState& state, const AllocationPlan& plan,
                                          const ChannelRealization& ch, const Scenario& sc,
                                          const TrajectoryConfig& cfg = {}) {
    ConvexStep out;
    out.state = state;
    out.state.iteration = state.iteration + 1;
    detail::TrajectoryBarrier problem(state.q, plan, ch, sc, cfg.penalty);

    VectorXd x0 = problem.start_point();
    out.state.surrogate_value = problem.surrogate_sum(x0);
    if (problem.free_dims() == 0) {
        out.solved = true;
        return out;
    }
    const auto feasible = find_strictly_feasible(problem, x0);
    if (!feasible) return out;

    BarrierOptions opt;
    opt.gap_tol = std::min(1e-9, 0.1 * cfg.kkt_tol);
    const auto r = minimize_barrier(problem, *feasible, opt);
    if (!r.x.allFinite()) return out;

    out.state.q = problem.trajectory(r.x);
    out.state.surrogate_value = problem.surrogate_sum(r.x);
    for (std::size_t j = 0; j < sc.num_pus; ++j) {
        for (std::size_t n = 0; n < sc.num_steps; ++n) out.state.xi_cell(j, n) = problem.linearized(r.x, n, sc.pu_pos[j]);
    }
    for (std::size_t m = 0; m < sc.num_wus; ++m) {
        for (std::size_t n = 0; n < sc.num_steps; ++n) out.state.xi_wifi(m, n) = problem.linearized(r.x, n, sc.wu_pos[m]);
    }
    out.kkt_residual = r.kkt_residual;
    out.solved = r.converged || r.kkt_residual <= cfg.kkt_tol;
    return out;
}

struct TrajectoryResult {
    Trajectory trajectory;
    std::vector<ScaTraceRow> trace;
    double value = 0.0;  // true sum rate at the returned trajectory
    bool converged = false;
};

namespace detail {

inline double total_shortfall(const AllocationPlan& plan, const ChannelRealization& ch, const Scenario& sc) {
    const auto totals = average_rates(plan, ch, sc).total();
    double s = 0.0;
    for (std::size_t k = 0; k < sc.num_sus; ++k) s += std::max(0.0, sc.r_min_bps_hz[k] - totals[k]);
    return s;
}

inline ScaState initial_state(const Trajectory& q, const ChannelRealization& ch, const Scenario& sc) {
    ScaState s{q, Grid2<double>(sc.num_pus, sc.num_steps), Grid2<double>(sc.num_wus, sc.num_steps), 0, 0.0, 0.0};
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        for (std::size_t j = 0; j < sc.num_pus; ++j) s.xi_cell(j, n) = norm2(q.q[n] - sc.pu_pos[j]);
        for (std::size_t m = 0; m < sc.num_wus; ++m) s.xi_wifi(m, n) = norm2(q.q[n] - sc.wu_pos[m]);
    }
    (void)ch;
    return s;
}

}  // namespace detail

/// SCA over the trajectory for a fixed allocation. A new iterate is accepted only when
/// the true sum rate does not drop and the total rate shortfall does not grow, so the
/// recorded true objective is non-decreasing.
inline TrajectoryResult optimize_trajectory(const Trajectory& init, const AllocationPlan& plan,
                                            const ChannelRealization& ch, const Scenario& sc,
                                            const TrajectoryConfig& cfg = {}) {
    TrajectoryResult out;
    ScaState state = detail::initial_state(init, ch, sc);
    ChannelRealization bound = rebind(ch, sc, init);
    state.true_value = sum_rate(plan, bound, sc);
    double shortfall = detail::total_shortfall(plan, bound, sc);
    state.surrogate_value = state.true_value;
    out.trace.push_back({0, state.surrogate_value, state.true_value, 0.0,
                         check_constraints(plan, init, bound, sc).max_violation()});

    for (int it = 1; it <= cfg.max_sca_iters; ++it) {
        const auto step = solve_convex_subproblem(state, plan, ch, sc, cfg);
        if (!step.solved && step.state.q == state.q) {
            out.converged = true;
            break;
        }
        const auto cand_ch = rebind(ch, sc, step.state.q);
        const double value = sum_rate(plan, cand_ch, sc);
        const double cand_short = detail::total_shortfall(plan, cand_ch, sc);
        const auto rep = check_constraints(plan, step.state.q, cand_ch, sc);
        const bool ok = value >= state.true_value - cfg.accept_slack && cand_short <= shortfall + cfg.accept_slack &&
                        rep.max_violation() <= 1e-6;
        if (!ok) {
            out.converged = true;
            break;
        }
        const double previous = state.true_value;
        state = step.state;
        state.true_value = value;
        shortfall = cand_short;
        out.trace.push_back({it, state.surrogate_value, value, step.kkt_residual, rep.max_violation()});
        if (value - previous <= cfg.sca_tol * std::max(1.0, std::abs(previous))) {
            out.converged = true;
            break;
        }
    }
    out.trajectory = state.q;
    out.value = state.true_value;
    return out;
}

}  // namespace airshare
