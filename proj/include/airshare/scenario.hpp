#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "airshare/grid.hpp"
#include "airshare/units.hpp"

namespace airshare {

/// Raised for any problem with a scenario configuration. The message starts with
/// the offending field path, e.g. "su_pos[2]: expected [x, y]".
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class FadingModel { rayleigh, none };

/// Static problem instance. Built only through validate_scenario(); every power is in watts.
struct Scenario {
    std::size_t num_sus = 0;  // K
    std::size_t num_wus = 0;  // M, also the number of unlicensed subchannels
    std::size_t num_pus = 0;  // J, also the number of licensed subchannels
    std::size_t num_steps = 0;  // N

    double horizon_s = 0.0;
    double step_s = 0.0;
    double uav_height_m = 0.0;
    double v_max_mps = 0.0;

    Vec2 pbs_pos;
    Vec2 wifi_ap_pos;
    std::vector<Vec2> pu_pos;
    std::vector<Vec2> wu_pos;
    std::vector<Vec2> su_pos;
    std::optional<Vec2> q_start;
    std::optional<Vec2> q_end;

    double p_max_lic_w = 0.0;
    double p_max_unlic_w = 0.0;
    std::vector<double> gamma_lic_w;    // per PU
    std::vector<double> gamma_unlic_w;  // per WU
    std::vector<double> r_min_bps_hz;   // per SU
    std::vector<double> pbs_power_w;    // per licensed subchannel
    std::vector<double> wifi_power_w;   // per unlicensed subchannel
    std::vector<double> noise_power_w;  // per SU

    double path_loss_exp = 0.0;
    double ground_path_loss_exp = 3.0;
    double beta0 = 0.0;
    FadingModel fading = FadingModel::rayleigh;

    Vec2 jammer_pos;
    std::size_t jammer_antennas = 1;
    Grid2<double> jammer_beam_power_w;  // K x N, effective |g_k^H w_k|^2

    std::uint64_t rng_seed = 0;

    double max_step_m() const { return v_max_mps * step_s; }

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// UAV horizontal waypoints, one per time step.
struct Trajectory {
    std::vector<Vec2> q;

    std::size_t size() const { return q.size(); }
    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline constexpr double kSpeedSlack = 1e-9;

/// True iff every consecutive displacement is within V_max * step (inclusive, 1e-9 slack).
inline bool speed_feasible(const Trajectory& traj, const Scenario& sc) {
    if (traj.size() != sc.num_steps) {
        throw std::invalid_argument("trajectory has " + std::to_string(traj.size()) +
                                    " points, scenario expects " + std::to_string(sc.num_steps));
    }
    const double limit = sc.max_step_m() + kSpeedSlack;
    for (std::size_t n = 1; n < traj.size(); ++n) {
        if (norm(traj.q[n] - traj.q[n - 1]) > limit) return false;
    }
    return true;
}

/// Largest relative C11 violation, 0 when feasible.
inline double speed_violation(const Trajectory& traj, const Scenario& sc) {
    double worst = 0.0;
    const double limit = sc.max_step_m();
    for (std::size_t n = 1; n < traj.size(); ++n) {
        worst = std::max(worst, norm(traj.q[n] - traj.q[n - 1]) / limit - 1.0);
    }
    return worst;
}

inline Vec2 su_centroid(const Scenario& sc) {
    Vec2 c;
    for (const auto& p : sc.su_pos) c = c + p;
    return (1.0 / static_cast<double>(sc.su_pos.size())) * c;
}

/// Hover at q_start when configured, otherwise above the SU centroid.
inline Trajectory hover_trajectory(const Scenario& sc) {
    const Vec2 at = sc.q_start.value_or(su_centroid(sc));
    return Trajectory{std::vector<Vec2>(sc.num_steps, at)};
}

/// Starting point for the trajectory optimizer: the straight q_start -> q_end line when
/// both endpoints are configured, otherwise a hover.
inline Trajectory initial_trajectory(const Scenario& sc) {
    if (!(sc.q_start && sc.q_end)) return hover_trajectory(sc);
    Trajectory t;
    t.q.reserve(sc.num_steps);
    const double denom = sc.num_steps > 1 ? static_cast<double>(sc.num_steps - 1) : 1.0;
    for (std::size_t n = 0; n < sc.num_steps; ++n) {
        const double s = static_cast<double>(n) / denom;
        t.q.push_back(*sc.q_start + s * (*sc.q_end - *sc.q_start));
    }
    return t;
}

}  // namespace airshare
