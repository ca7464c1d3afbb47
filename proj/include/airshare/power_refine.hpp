#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "airshare/barrier.hpp"
#include "airshare/grid.hpp"

namespace airshare {

/// One active (SU, subchannel, step) triple of a fixed assignment. gain is
/// |h_us|^2 divided by the pair's interference-plus-noise floor, so SINR = gain * p.
struct ActivePair {
    std::size_t k = 0;
    std::size_t sub = 0;
    std::size_t n = 0;
    double gain = 0.0;
};

/// Power allocation for a fixed subchannel assignment in one band:
///   maximize (1/N) sum log2(1 + gain * p)
///   s.t. per-step budget, time-averaged victim interference per subchannel,
///        optional per-SU average-rate targets (soft, exact penalty on the shortfall).
struct PowerProgram {
    std::size_t num_sus = 0;
    std::size_t num_subchannels = 0;
    std::size_t num_steps = 0;
    double p_max = 0.0;
    std::vector<ActivePair> pairs;
    Grid2<double> victim_gain;        // subchannel x step
    std::vector<double> gamma;        // per subchannel
    std::vector<double> rate_target;  // per SU; empty when the band has no rate constraint
    double penalty = 1e3;
};

struct PowerSolution {
    std::vector<double> power;      // aligned with PowerProgram::pairs
    std::vector<double> shortfall;  // per SU, empty when no targets
    double rate = 0.0;              // (1/N) sum log2(1 + gain p)
    double kkt_residual = 0.0;
    bool solved = false;
};

namespace detail {

class PowerBarrier {
public:
    explicit PowerBarrier(const PowerProgram& prog) : prog_(prog) {
        const std::size_t V = prog.pairs.size();
        step_members_.assign(prog.num_steps, {});
        sub_members_.assign(prog.num_subchannels, {});
        su_members_.assign(prog.num_sus, {});
        for (std::size_t v = 0; v < V; ++v) {
            step_members_[prog.pairs[v].n].push_back(v);
            sub_members_[prog.pairs[v].sub].push_back(v);
            su_members_[prog.pairs[v].k].push_back(v);
        }
        for (std::size_t n = 0; n < prog.num_steps; ++n) {
            if (!step_members_[n].empty()) steps_.push_back(n);
        }
        for (std::size_t c = 0; c < prog.num_subchannels; ++c) {
            if (!sub_members_[c].empty()) subs_.push_back(c);
        }
        for (std::size_t k = 0; k < prog.rate_target.size(); ++k) {
            if (prog.rate_target[k] > 0.0) targeted_.push_back(k);
        }
        inv_n_ = 1.0 / static_cast<double>(prog.num_steps);
    }

    Eigen::Index dimension() const { return static_cast<Eigen::Index>(prog_.pairs.size() + targeted_.size()); }
    Eigen::Index constraint_count() const {
        return static_cast<Eigen::Index>(prog_.pairs.size() + steps_.size() + subs_.size() +
                                         2 * targeted_.size());
    }

    std::size_t pair_count() const { return prog_.pairs.size(); }
    const std::vector<std::size_t>& targeted() const { return targeted_; }

    double rate_of(std::size_t v, double p) const { return std::log2(1.0 + prog_.pairs[v].gain * p); }

    double su_rate(const VectorXd& x, std::size_t k) const {
        double r = 0.0;
        for (std::size_t v : su_members_[k]) r += rate_of(v, x[static_cast<Eigen::Index>(v)]);
        return r * inv_n_;
    }

    double objective(const VectorXd& x, VectorXd* grad, MatrixXd* hess) const {
        const std::size_t V = prog_.pairs.size();
        double f = 0.0;
        for (std::size_t v = 0; v < V; ++v) {
            const auto i = static_cast<Eigen::Index>(v);
            const double g = prog_.pairs[v].gain;
            const double a = 1.0 + g * x[i];
            if (!(a > 0.0)) return std::numeric_limits<double>::infinity();
            f -= inv_n_ * std::log2(a);
            if (grad) (*grad)[i] = -inv_n_ * g / (std::numbers::ln2 * a);
            if (hess) (*hess)(i, i) = inv_n_ * g * g / (std::numbers::ln2 * a * a);
        }
        for (std::size_t t = 0; t < targeted_.size(); ++t) {
            const auto i = static_cast<Eigen::Index>(V + t);
            f += prog_.penalty * x[i];
            if (grad) (*grad)[i] = prog_.penalty;
        }
        return f;
    }

    void constraints(const VectorXd& x, VectorXd& val, MatrixXd* jac) const {
        const std::size_t V = prog_.pairs.size();
        val.resize(constraint_count());
        Eigen::Index row = 0;
        for (std::size_t v = 0; v < V; ++v, ++row) {
            val[row] = -x[static_cast<Eigen::Index>(v)] / prog_.p_max;
            if (jac) (*jac)(row, static_cast<Eigen::Index>(v)) = -1.0 / prog_.p_max;
        }
        for (std::size_t n : steps_) {
            double s = 0.0;
            for (std::size_t v : step_members_[n]) {
                s += x[static_cast<Eigen::Index>(v)];
                if (jac) (*jac)(row, static_cast<Eigen::Index>(v)) = 1.0 / prog_.p_max;
            }
            val[row++] = s / prog_.p_max - 1.0;
        }
        for (std::size_t c : subs_) {
            const double scale = 1.0 / (static_cast<double>(prog_.num_steps) * prog_.gamma[c]);
            double s = 0.0;
            for (std::size_t v : sub_members_[c]) {
                const double h = prog_.victim_gain(c, prog_.pairs[v].n);
                s += h * x[static_cast<Eigen::Index>(v)];
                if (jac) (*jac)(row, static_cast<Eigen::Index>(v)) = h * scale;
            }
            val[row++] = s * scale - 1.0;
        }
        for (std::size_t t = 0; t < targeted_.size(); ++t) {
            const std::size_t k = targeted_[t];
            const double scale = 1.0 / std::max(prog_.rate_target[k], 1.0);
            const auto si = static_cast<Eigen::Index>(V + t);
            double r = 0.0;
            for (std::size_t v : su_members_[k]) {
                const auto i = static_cast<Eigen::Index>(v);
                const double g = prog_.pairs[v].gain;
                const double a = 1.0 + g * x[i];
                r += std::log2(std::max(a, 0.0));
                if (jac) (*jac)(row, i) = -scale * inv_n_ * g / (std::numbers::ln2 * a);
            }
            val[row] = scale * (prog_.rate_target[k] - inv_n_ * r - x[si]);
            if (jac) (*jac)(row, si) = -scale;
            ++row;
            val[row] = -x[si];
            if (jac) (*jac)(row, si) = -1.0;
            ++row;
        }
    }

    void add_constraint_curvature(const VectorXd& x, const VectorXd& w, MatrixXd& H) const {
        const Eigen::Index first = static_cast<Eigen::Index>(prog_.pairs.size() + steps_.size() + subs_.size());
        for (std::size_t t = 0; t < targeted_.size(); ++t) {
            const std::size_t k = targeted_[t];
            const double scale = 1.0 / std::max(prog_.rate_target[k], 1.0);
            const double wk = w[first + static_cast<Eigen::Index>(2 * t)];
            for (std::size_t v : su_members_[k]) {
                const auto i = static_cast<Eigen::Index>(v);
                const double g = prog_.pairs[v].gain;
                const double a = 1.0 + g * x[i];
                H(i, i) += wk * scale * inv_n_ * g * g / (std::numbers::ln2 * a * a);
            }
        }
    }

    VectorXd start_point() const {
        const std::size_t V = prog_.pairs.size();
        VectorXd x(dimension());
        std::vector<double> sub_cap(prog_.num_subchannels, 0.0);
        for (std::size_t c : subs_) {
            double hsum = 0.0;
            for (std::size_t v : sub_members_[c]) hsum += prog_.victim_gain(c, prog_.pairs[v].n);
            sub_cap[c] = hsum > 0.0 ? static_cast<double>(prog_.num_steps) * prog_.gamma[c] / hsum
                                    : prog_.p_max;
        }
        for (std::size_t v = 0; v < V; ++v) {
            const auto& pr = prog_.pairs[v];
            const double step_share = prog_.p_max / static_cast<double>(step_members_[pr.n].size());
            x[static_cast<Eigen::Index>(v)] = 0.5 * std::min(step_share, sub_cap[pr.sub]);
        }
        for (std::size_t t = 0; t < targeted_.size(); ++t) {
            const std::size_t k = targeted_[t];
            x[static_cast<Eigen::Index>(V + t)] =
                std::max(0.0, prog_.rate_target[k] - su_rate(x, k)) + std::max(prog_.rate_target[k], 1.0);
        }
        return x;
    }

    void set_penalty(double w) { prog_.penalty = w; }

private:
    PowerProgram prog_;
    std::vector<std::vector<std::size_t>> step_members_, sub_members_, su_members_;
    std::vector<std::size_t> steps_, subs_, targeted_;
    double inv_n_ = 1.0;
};

}  // namespace detail

/// Solves a PowerProgram with the barrier method. Rate targets are enforced through an
/// exact penalty whose weight doubles (at most 10 times) while the shortfall keeps shrinking.
inline PowerSolution solve_power_program(const PowerProgram& prog) {
    PowerSolution sol;
    const std::size_t V = prog.pairs.size();
    sol.power.assign(V, 0.0);
    if (!prog.rate_target.empty()) {
        sol.shortfall.assign(prog.num_sus, 0.0);
        for (std::size_t k = 0; k < prog.num_sus; ++k) sol.shortfall[k] = std::max(0.0, prog.rate_target[k]);
    }
    if (V == 0) {
        sol.solved = true;
        return sol;
    }

    detail::PowerBarrier problem(prog);
    BarrierOptions opt;
    opt.gap_tol = 1e-9;
    double weight = prog.penalty;
    double last_shortfall = std::numeric_limits<double>::infinity();
    BarrierResult best;
    for (int doubling = 0; doubling <= 10; ++doubling) {
        problem.set_penalty(weight);
        auto r = minimize_barrier(problem, problem.start_point(), opt);
        if (!r.x.allFinite()) break;
        double shortfall = 0.0;
        for (std::size_t k : problem.targeted()) {
            shortfall += std::max(0.0, prog.rate_target[k] - problem.su_rate(r.x, k));
        }
        best = std::move(r);
        if (shortfall <= 1e-9 || shortfall > 0.99 * last_shortfall) break;
        last_shortfall = shortfall;
        weight *= 2.0;
    }
    if (best.x.size() == 0) return sol;

    for (std::size_t v = 0; v < V; ++v) sol.power[v] = std::max(0.0, best.x[static_cast<Eigen::Index>(v)]);
    double rate = 0.0;
    for (std::size_t v = 0; v < V; ++v) rate += problem.rate_of(v, sol.power[v]);
    sol.rate = rate / static_cast<double>(prog.num_steps);
    for (std::size_t k : problem.targeted()) {
        VectorXd p(static_cast<Eigen::Index>(V));
        for (std::size_t v = 0; v < V; ++v) p[static_cast<Eigen::Index>(v)] = sol.power[v];
        sol.shortfall[k] = std::max(0.0, prog.rate_target[k] - problem.su_rate(p, k));
    }
    sol.kkt_residual = best.kkt_residual;
    sol.solved = best.converged;
    return sol;
}

}  // namespace airshare
