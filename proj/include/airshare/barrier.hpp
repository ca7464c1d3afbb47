#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <optional>

#include <Eigen/Dense>

namespace airshare {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Smooth convex program: minimize objective(x) subject to constraints_i(x) <= 0.
///
/// objective(x, grad, hess) returns f0(x) and fills grad/hess when they are non-null.
/// constraints(x, values, jac) fills f_i(x) (may be +inf outside the domain) and the
/// Jacobian when non-null. add_constraint_curvature(x, w, H) adds sum_i w_i * hess f_i.
template <class P>
concept BarrierProblem = requires(const P& p, const VectorXd& x, VectorXd& v, MatrixXd& m, const VectorXd& w) {
    { p.dimension() } -> std::convertible_to<Eigen::Index>;
    { p.constraint_count() } -> std::convertible_to<Eigen::Index>;
    { p.objective(x, &v, &m) } -> std::convertible_to<double>;
    p.constraints(x, v, &m);
    p.add_constraint_curvature(x, w, m);
};

struct BarrierOptions {
    double t0 = 0.0;            // initial barrier parameter; <= 0 picks m / (|f0(x0)| + 1)
    double mu = 10.0;           // barrier parameter growth per outer step
    double gap_tol = 1e-10;     // stop when m / t falls below this
    double newton_tol = 1e-11;  // half squared Newton decrement
    int max_newton = 80;        // per centering step
    int max_outer = 40;
    double armijo = 1e-4;
    double backtrack = 0.5;
    /// Optional early exit checked after each centering step.
    std::function<bool(const VectorXd&)> stop_when;
};

struct BarrierResult {
    VectorXd x;
    double objective = 0.0;
    VectorXd multipliers;       // lambda_i = 1 / (-t f_i)
    double stationarity = 0.0;  // || grad f0 + J^T lambda ||_inf
    double duality_gap = 0.0;   // m / t
    double kkt_residual = 0.0;  // max(stationarity, duality_gap)
    int newton_steps = 0;
    bool converged = false;
};

namespace detail {

template <BarrierProblem P>
bool strictly_feasible(const P& p, const VectorXd& x, VectorXd& f) {
    if (!x.allFinite()) return false;
    p.constraints(x, f, nullptr);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        if (!(f[i] < 0.0)) return false;
    }
    return true;
}

/// Directional derivative of t f0 - sum log(-f_i) at x along dx; f and jac are scratch.
template <BarrierProblem P>
double barrier_slope(const P& p, const VectorXd& x, double t, const VectorXd& dx, VectorXd& f, MatrixXd& jac) {
    VectorXd g(x.size());
    g.setZero();
    p.objective(x, &g, nullptr);
    jac.setZero();
    p.constraints(x, f, &jac);
    return t * g.dot(dx) + (jac * dx).dot((-f).cwiseInverse());
}

template <BarrierProblem P>
double barrier_value(const P& p, const VectorXd& x, double t, VectorXd& f) {
    if (!strictly_feasible(p, x, f)) return std::numeric_limits<double>::infinity();
    const double f0 = p.objective(x, nullptr, nullptr);
    if (!std::isfinite(f0)) return std::numeric_limits<double>::infinity();
    return t * f0 - (-f.array()).log().sum();
}

}  // namespace detail

/// Log-barrier interior-point method with damped Newton centering. x0 must be strictly
/// feasible; the returned point is strictly feasible and within duality_gap of optimal.
template <BarrierProblem P>
BarrierResult minimize_barrier(const P& p, VectorXd x0, const BarrierOptions& opt = {}) {
    const Eigen::Index d = p.dimension();
    const Eigen::Index m = p.constraint_count();
    VectorXd f(m), g0(d), g(d), fd(m), dx(d);
    MatrixXd H0(d, d), H(d, d), Jc(m, d);

    BarrierResult res;
    res.x = std::move(x0);
    if (!detail::strictly_feasible(p, res.x, f)) {
        res.objective = std::numeric_limits<double>::quiet_NaN();
        return res;
    }

    double t = opt.t0;
    if (!(t > 0.0)) {
        const double f00 = p.objective(res.x, nullptr, nullptr);
        t = std::clamp(static_cast<double>(std::max<Eigen::Index>(m, 1)) / (std::abs(f00) + 1.0), 1e-8, 1.0);
    }
    for (int outer = 0; outer < opt.max_outer; ++outer) {
        for (int it = 0; it < opt.max_newton; ++it) {
            g0.setZero();
            H0.setZero();
            p.objective(res.x, &g0, &H0);
            Jc.setZero();
            p.constraints(res.x, f, &Jc);
            const VectorXd inv = (-f).cwiseInverse();
            g = t * g0 + Jc.transpose() * inv;
            H = t * H0 + Jc.transpose() * inv.cwiseAbs2().asDiagonal() * Jc;
            p.add_constraint_curvature(res.x, inv, H);

            Eigen::LDLT<MatrixXd> ldlt(H);
            dx = ldlt.solve(-g);
            double reg = 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
            while ((ldlt.info() != Eigen::Success || !dx.allFinite() || g.dot(dx) >= 0.0) && reg < 1e12) {
                MatrixXd Hr = H;
                Hr.diagonal().array() += reg;
                ldlt.compute(Hr);
                dx = ldlt.solve(-g);
                reg *= 100.0;
            }
            const double decrement = -g.dot(dx);
            if (!(decrement > 2.0 * opt.newton_tol)) break;

            const double phi = detail::barrier_value(p, res.x, t, fd);
            // Once the decrease is lost in the rounding of phi, Armijo cannot judge the step;
            // inside the quadratic region a feasible full Newton step is taken instead.
            const bool noisy = decrement <= 1e-12 * std::abs(phi);
            double step = 1.0;
            bool moved = false;
            while (step > 1e-16) {
                const VectorXd trial = res.x + step * dx;
                const double phi_trial = detail::barrier_value(p, trial, t, fd);
                const bool accept =
                    noisy ? std::isfinite(phi_trial) &&
                                std::abs(detail::barrier_slope(p, trial, t, dx, fd, Jc)) < 0.5 * decrement
                          : phi_trial <= phi - opt.armijo * step * decrement;
                if (accept) {
                    res.x = trial;
                    moved = true;
                    break;
                }
                step *= opt.backtrack;
            }
            ++res.newton_steps;
            if (!moved) break;
        }
        if (opt.stop_when && opt.stop_when(res.x)) break;
        if (m == 0 || static_cast<double>(m) / t < opt.gap_tol) {
            res.converged = true;
            break;
        }
        t *= opt.mu;
    }

    g0.setZero();
    Jc.setZero();
    res.objective = p.objective(res.x, &g0, nullptr);
    p.constraints(res.x, f, &Jc);
    res.multipliers = (-f).cwiseInverse() / t;
    res.stationarity = m > 0 ? (g0 + Jc.transpose() * res.multipliers).cwiseAbs().maxCoeff()
                             : g0.cwiseAbs().maxCoeff();
    res.duality_gap = static_cast<double>(m) / t;
    res.kkt_residual = std::max(res.stationarity, res.duality_gap);
    return res;
}

/// Phase-I program: minimize s subject to f_i(x) <= s and s >= -1.
template <BarrierProblem P>
class PhaseOne {
public:
    explicit PhaseOne(const P& inner) : inner_(inner) {}

    Eigen::Index dimension() const { return inner_.dimension() + 1; }
    Eigen::Index constraint_count() const { return inner_.constraint_count() + 1; }

    double objective(const VectorXd& z, VectorXd* grad, MatrixXd* hess) const {
        if (grad) {
            grad->setZero(dimension());
            (*grad)[dimension() - 1] = 1.0;
        }
        if (hess) hess->setZero(dimension(), dimension());
        return z[dimension() - 1];
    }

    void constraints(const VectorXd& z, VectorXd& values, MatrixXd* jac) const {
        const Eigen::Index d = inner_.dimension(), m = inner_.constraint_count();
        const VectorXd x = z.head(d);
        const double s = z[d];
        VectorXd f(m);
        MatrixXd J;
        if (jac) J.setZero(m, d);
        inner_.constraints(x, f, jac ? &J : nullptr);
        values.resize(m + 1);
        values.head(m) = f.array() - s;
        values[m] = -s - 1.0;
        if (jac) {
            jac->setZero(m + 1, d + 1);
            jac->topLeftCorner(m, d) = J;
            jac->col(d).head(m).setConstant(-1.0);
            (*jac)(m, d) = -1.0;
        }
    }

    void add_constraint_curvature(const VectorXd& z, const VectorXd& w, MatrixXd& H) const {
        const Eigen::Index d = inner_.dimension(), m = inner_.constraint_count();
        MatrixXd Hx = MatrixXd::Zero(d, d);
        inner_.add_constraint_curvature(z.head(d), w.head(m), Hx);
        H.topLeftCorner(d, d) += Hx;
    }

private:
    const P& inner_;
};

/// Moves a point that satisfies the constraints only weakly (or not at all) into the
/// strict interior. Returns nullopt when no strictly feasible point was found.
template <BarrierProblem P>
std::optional<VectorXd> find_strictly_feasible(const P& p, const VectorXd& x0) {
    VectorXd f(p.constraint_count());
    if (detail::strictly_feasible(p, x0, f)) return x0;
    if (!x0.allFinite()) return std::nullopt;
    p.constraints(x0, f, nullptr);
    if (!f.allFinite()) return std::nullopt;

    PhaseOne<P> phase(p);
    VectorXd z(x0.size() + 1);
    z.head(x0.size()) = x0;
    z[x0.size()] = std::max(f.maxCoeff(), 0.0) + 1e-3;
    const Eigen::Index d = x0.size();
    BarrierOptions opt;
    opt.gap_tol = 1e-9;
    opt.stop_when = [&](const VectorXd& zz) {
        VectorXd ff(p.constraint_count());
        return zz[d] < -1e-9 && detail::strictly_feasible(p, VectorXd(zz.head(d)), ff);
    };
    const auto r = minimize_barrier(phase, z, opt);
    VectorXd x = r.x.head(d);
    if (detail::strictly_feasible(p, x, f)) return x;
    return std::nullopt;
}

}  // namespace airshare
