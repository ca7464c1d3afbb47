#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "airshare/channel.hpp"
#include "airshare/grid.hpp"
#include "airshare/scenario.hpp"

namespace airshare {

/// Binary subchannel indicators and transmit powers for both bands, indexed
/// (SU, subchannel, step). A power is positive only where its indicator is set.
struct AllocationPlan {
    Grid3<std::uint8_t> rho_lic;  // K x J x N
    Grid3<double> p_lic;
    Grid3<std::uint8_t> rho_unlic;  // K x M x N
    Grid3<double> p_unlic;

    static AllocationPlan empty(const Scenario& sc) {
        const std::size_t K = sc.num_sus, M = sc.num_wus, J = sc.num_pus, N = sc.num_steps;
        return {Grid3<std::uint8_t>(K, J, N), Grid3<double>(K, J, N), Grid3<std::uint8_t>(K, M, N),
                Grid3<double>(K, M, N)};
    }

    friend bool operator==(const AllocationPlan&, const AllocationPlan&) = default;
};

/// Licensed part of R_k[n] summed over subchannels.
inline double licensed_rate(const AllocationPlan& plan, std::size_t k, std::size_t n,
                            const ChannelRealization& ch, const Scenario& sc) {
    double r = 0.0;
    for (std::size_t j = 0; j < sc.num_pus; ++j) {
        if (plan.rho_lic(k, j, n)) r += rate_term(1, sinr_licensed(plan.p_lic(k, j, n), k, j, n, ch, sc));
    }
    return r;
}

inline double unlicensed_rate(const AllocationPlan& plan, std::size_t k, std::size_t n,
                              const ChannelRealization& ch, const Scenario& sc) {
    double r = 0.0;
    for (std::size_t m = 0; m < sc.num_wus; ++m) {
        if (plan.rho_unlic(k, m, n)) {
            r += rate_term(1, sinr_unlicensed(plan.p_unlic(k, m, n), k, m, n, ch, sc));
        }
    }
    return r;
}

struct SuRates {
    std::vector<double> licensed;    // time-averaged, per SU
    std::vector<double> unlicensed;  // time-averaged, per SU
    std::vector<double> total() const {
        std::vector<double> t(licensed.size());
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = licensed[k] + unlicensed[k];
        return t;
    }
};

inline SuRates average_rates(const AllocationPlan& plan, const ChannelRealization& ch, const Scenario& sc) {
    SuRates r{std::vector<double>(sc.num_sus, 0.0), std::vector<double>(sc.num_sus, 0.0)};
    const double inv_n = 1.0 / static_cast<double>(sc.num_steps);
    for (std::size_t k = 0; k < sc.num_sus; ++k) {
        for (std::size_t n = 0; n < sc.num_steps; ++n) {
            r.licensed[k] += licensed_rate(plan, k, n, ch, sc);
            r.unlicensed[k] += unlicensed_rate(plan, k, n, ch, sc);
        }
        r.licensed[k] *= inv_n;
        r.unlicensed[k] *= inv_n;
    }
    return r;
}

/// Objective of the joint problem: (1/N) sum_n sum_k R_k[n], in bits/s/Hz.
/// Summation order is fixed (n outer, k, then band) so results are reproducible.
inline double sum_rate(const AllocationPlan& plan, const ChannelRealization& ch, const Scenario& sc) {
    double total = 0.0;
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        for (std::size_t k = 0; k < sc.num_sus; ++k) {
            total += licensed_rate(plan, k, n, ch, sc) + unlicensed_rate(plan, k, n, ch, sc);
        }
    }
    return total / static_cast<double>(sc.num_steps);
}

/// Time-averaged interference received by PU j: (1/N) sum_n sum_k |h_up|^2 p.
inline double licensed_interference(const AllocationPlan& plan, std::size_t j, const ChannelRealization& ch,
                                    const Scenario& sc) {
    double acc = 0.0;
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        for (std::size_t k = 0; k < sc.num_sus; ++k) {
            if (plan.rho_lic(k, j, n)) acc += ch.h_up(j, n) * plan.p_lic(k, j, n);
        }
    }
    return acc / static_cast<double>(sc.num_steps);
}

inline double unlicensed_interference(const AllocationPlan& plan, std::size_t m, const ChannelRealization& ch,
                                      const Scenario& sc) {
    double acc = 0.0;
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        for (std::size_t k = 0; k < sc.num_sus; ++k) {
            if (plan.rho_unlic(k, m, n)) acc += ch.h_uw(m, n) * plan.p_unlic(k, m, n);
        }
    }
    return acc / static_cast<double>(sc.num_steps);
}

inline double licensed_step_power(const AllocationPlan& plan, std::size_t n, const Scenario& sc) {
    double s = 0.0;
    for (std::size_t k = 0; k < sc.num_sus; ++k) {
        for (std::size_t j = 0; j < sc.num_pus; ++j) {
            if (plan.rho_lic(k, j, n)) s += plan.p_lic(k, j, n);
        }
    }
    return s;
}

inline double unlicensed_step_power(const AllocationPlan& plan, std::size_t n, const Scenario& sc) {
    double s = 0.0;
    for (std::size_t k = 0; k < sc.num_sus; ++k) {
        for (std::size_t m = 0; m < sc.num_wus; ++m) {
            if (plan.rho_unlic(k, m, n)) s += plan.p_unlic(k, m, n);
        }
    }
    return s;
}

/// Worst relative violation per constraint family. Zero means satisfied.
struct ConstraintReport {
    double c1_shortfall = 0.0;  // largest (R_min - achieved), bits/s/Hz
    double c2 = 0.0;            // licensed interference, relative to Gamma_lic
    double c3 = 0.0;            // unlicensed interference, relative to Gamma_unlic
    double c4c5c6 = 0.0;        // subchannel exclusivity (count excess)
    double c9 = 0.0;            // licensed step budget, relative to P_max_lic
    double c10 = 0.0;           // unlicensed step budget, relative to P_max_unlic
    double c11 = 0.0;           // speed, relative to V_max * step
    double power_without_rho = 0.0;  // power on a subchannel whose indicator is 0
    std::vector<double> rate_shortfall;  // per SU

    /// Largest relative violation among C2-C11 (C1 is reported separately as a shortfall).
    double max_violation() const {
        return std::max({c2, c3, c4c5c6, c9, c10, c11, power_without_rho});
    }
};

inline ConstraintReport check_constraints(const AllocationPlan& plan, const Trajectory& traj,
                                          const ChannelRealization& ch, const Scenario& sc) {
    const std::size_t K = sc.num_sus, M = sc.num_wus, J = sc.num_pus, N = sc.num_steps;
    ConstraintReport rep;
    const auto totals = average_rates(plan, ch, sc).total();
    rep.rate_shortfall.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        rep.rate_shortfall[k] = std::max(0.0, sc.r_min_bps_hz[k] - totals[k]);
        rep.c1_shortfall = std::max(rep.c1_shortfall, rep.rate_shortfall[k]);
    }
    for (std::size_t j = 0; j < J; ++j) {
        rep.c2 = std::max(rep.c2, licensed_interference(plan, j, ch, sc) / sc.gamma_lic_w[j] - 1.0);
    }
    for (std::size_t m = 0; m < M; ++m) {
        rep.c3 = std::max(rep.c3, unlicensed_interference(plan, m, ch, sc) / sc.gamma_unlic_w[m] - 1.0);
    }
    for (std::size_t n = 0; n < N; ++n) {
        rep.c9 = std::max(rep.c9, licensed_step_power(plan, n, sc) / sc.p_max_lic_w - 1.0);
        rep.c10 = std::max(rep.c10, unlicensed_step_power(plan, n, sc) / sc.p_max_unlic_w - 1.0);
        for (std::size_t j = 0; j < J; ++j) {
            int users = 0;
            for (std::size_t k = 0; k < K; ++k) users += plan.rho_lic(k, j, n);
            rep.c4c5c6 = std::max(rep.c4c5c6, static_cast<double>(users - 1));
        }
        for (std::size_t k = 0; k < K; ++k) {
            int channels = 0;
            for (std::size_t j = 0; j < J; ++j) channels += plan.rho_lic(k, j, n);
            rep.c4c5c6 = std::max(rep.c4c5c6, static_cast<double>(channels - 1));
        }
        for (std::size_t m = 0; m < M; ++m) {
            int users = 0;
            for (std::size_t k = 0; k < K; ++k) users += plan.rho_unlic(k, m, n);
            rep.c4c5c6 = std::max(rep.c4c5c6, static_cast<double>(users - 1));
        }
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < J; ++j) {
                if (!plan.rho_lic(k, j, n) && plan.p_lic(k, j, n) > 0.0) rep.power_without_rho = 1.0;
            }
            for (std::size_t m = 0; m < M; ++m) {
                if (!plan.rho_unlic(k, m, n) && plan.p_unlic(k, m, n) > 0.0) rep.power_without_rho = 1.0;
            }
        }
    }
    rep.c11 = std::max(0.0, speed_violation(traj, sc));
    return rep;
}

}  // namespace airshare
