#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "airshare/grid.hpp"
#include "airshare/rng.hpp"
#include "airshare/scenario.hpp"

namespace airshare {

/// Small-scale fading power factors, frozen per (link, step) at realization time.
struct FadingDraws {
    Grid2<double> us;  // UAV -> SU k
    Grid2<double> ps;  // PBS -> SU k
    Grid2<double> ws;  // Wi-Fi AP -> SU k
    Grid2<double> up;  // UAV -> PU j
    Grid2<double> uw;  // UAV -> WU m

    friend bool operator==(const FadingDraws&, const FadingDraws&) = default;
};

/// Channel power gains |h|^2 for every link and step, plus effective jamming power.
/// UAV-side gains depend on the trajectory they were computed for; rebind() recomputes
/// them for a new trajectory while keeping the fading draws and ground-side gains.
struct ChannelRealization {
    Grid2<double> h_us;  // K x N
    Grid2<double> h_ps;  // K x N
    Grid2<double> h_ws;  // K x N
    Grid2<double> h_up;  // J x N
    Grid2<double> h_uw;  // M x N
    Grid2<double> jam_power_w;  // K x N
    FadingDraws fading;
    std::uint64_t seed = 0;

    friend bool operator==(const ChannelRealization&, const ChannelRealization&) = default;
};

/// Air-to-ground LoS law: beta0 * fading * (|q - w|^2 + H^2)^(-phi/2).
inline double uav_link_gain(const Scenario& sc, Vec2 uav, Vec2 ground, double fading) {
    const double d2 = norm2(uav - ground) + sc.uav_height_m * sc.uav_height_m;
    return sc.beta0 * fading * std::pow(d2, -0.5 * sc.path_loss_exp);
}

/// Ground-to-ground law with its own exponent; distances below 1 m are clamped to the
/// reference distance.
inline double ground_link_gain(const Scenario& sc, Vec2 a, Vec2 b, double fading) {
    const double d = std::max(norm(a - b), 1.0);
    return sc.beta0 * fading * std::pow(d, -sc.ground_path_loss_exp);
}

inline FadingDraws draw_fading(const Scenario& sc, std::uint64_t seed) {
    const std::size_t K = sc.num_sus, M = sc.num_wus, J = sc.num_pus, N = sc.num_steps;
    FadingDraws f{Grid2<double>(K, N, 1.0), Grid2<double>(K, N, 1.0), Grid2<double>(K, N, 1.0),
                  Grid2<double>(J, N, 1.0), Grid2<double>(M, N, 1.0)};
    if (sc.fading == FadingModel::none) return f;
    RandomStream rng(derive_seed(seed, StreamTag::fading));
    for (Grid2<double>* g : {&f.us, &f.ps, &f.ws, &f.up, &f.uw}) {
        for (double& v : g->flat()) v = rng.exponential();
    }
    return f;
}

inline void bind_uav_gains(ChannelRealization& ch, const Scenario& sc, const Trajectory& traj) {
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        const Vec2 q = traj.q[n];
        for (std::size_t k = 0; k < sc.num_sus; ++k) {
            ch.h_us(k, n) = uav_link_gain(sc, q, sc.su_pos[k], ch.fading.us(k, n));
        }
        for (std::size_t j = 0; j < sc.num_pus; ++j) {
            ch.h_up(j, n) = uav_link_gain(sc, q, sc.pu_pos[j], ch.fading.up(j, n));
        }
        for (std::size_t m = 0; m < sc.num_wus; ++m) {
            ch.h_uw(m, n) = uav_link_gain(sc, q, sc.wu_pos[m], ch.fading.uw(m, n));
        }
    }
}

/// Pure function of (sc, traj, seed).
inline ChannelRealization realize_channels(const Scenario& sc, const Trajectory& traj, std::uint64_t seed) {
    if (traj.size() != sc.num_steps) throw std::invalid_argument("trajectory length differs from num_steps");
    const std::size_t K = sc.num_sus, M = sc.num_wus, J = sc.num_pus, N = sc.num_steps;
    ChannelRealization ch;
    ch.seed = seed;
    ch.fading = draw_fading(sc, seed);
    ch.h_us = Grid2<double>(K, N);
    ch.h_ps = Grid2<double>(K, N);
    ch.h_ws = Grid2<double>(K, N);
    ch.h_up = Grid2<double>(J, N);
    ch.h_uw = Grid2<double>(M, N);
    ch.jam_power_w = sc.jammer_beam_power_w;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t n = 0; n < N; ++n) {
            ch.h_ps(k, n) = ground_link_gain(sc, sc.pbs_pos, sc.su_pos[k], ch.fading.ps(k, n));
            ch.h_ws(k, n) = ground_link_gain(sc, sc.wifi_ap_pos, sc.su_pos[k], ch.fading.ws(k, n));
        }
    }
    bind_uav_gains(ch, sc, traj);
    return ch;
}

inline ChannelRealization rebind(ChannelRealization ch, const Scenario& sc, const Trajectory& traj) {
    if (traj.size() != sc.num_steps) throw std::invalid_argument("trajectory length differs from num_steps");
    bind_uav_gains(ch, sc, traj);
    return ch;
}

/// Interference-plus-noise floor seen by SU k on licensed subchannel j (PBS + jammer + noise).
inline double licensed_floor(std::size_t k, std::size_t j, std::size_t n, const ChannelRealization& ch,
                             const Scenario& sc) {
    return ch.h_ps(k, n) * sc.pbs_power_w[j] + ch.jam_power_w(k, n) + sc.noise_power_w[k];
}

/// Same for unlicensed subchannel m, with the Wi-Fi AP as the interferer.
inline double unlicensed_floor(std::size_t k, std::size_t m, std::size_t n, const ChannelRealization& ch,
                               const Scenario& sc) {
    return ch.h_ws(k, n) * sc.wifi_power_w[m] + ch.jam_power_w(k, n) + sc.noise_power_w[k];
}

inline double sinr_licensed(double p, std::size_t k, std::size_t j, std::size_t n,
                            const ChannelRealization& ch, const Scenario& sc) {
    return ch.h_us(k, n) * p / licensed_floor(k, j, n, ch, sc);
}

inline double sinr_unlicensed(double p, std::size_t k, std::size_t m, std::size_t n,
                              const ChannelRealization& ch, const Scenario& sc) {
    return ch.h_us(k, n) * p / unlicensed_floor(k, m, n, ch, sc);
}

/// rho * log2(1 + sinr) for a binary subchannel indicator.
inline double rate_term(int rho, double sinr) {
    if (rho != 0 && rho != 1) throw std::invalid_argument("rho must be 0 or 1");
    if (sinr < 0.0) throw std::invalid_argument("negative SINR");
    return rho == 0 ? 0.0 : std::log2(1.0 + sinr);
}

}  // namespace airshare
