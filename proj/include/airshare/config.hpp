#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include <json.hpp>

#include "airshare/scenario.hpp"

namespace airshare {

namespace detail {

using nlohmann::json;

inline std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

inline std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline const json& require(const json& doc, const std::string& key) {
    auto it = doc.find(key);
    if (it == doc.end()) throw ConfigError(key, "missing required field");
    return *it;
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

inline double positive_number(const json& v, const std::string& path) {
    const double x = as_number(v, path);
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(path, "must be positive and finite");
    return x;
}

inline std::size_t positive_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() <= 0) {
        throw ConfigError(path, "expected a positive integer");
    }
    return static_cast<std::size_t>(v.get<long long>());
}

inline Vec2 as_point(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) throw ConfigError(path, "expected [x, y]");
    return {as_number(v[0], index_path(path, 0)), as_number(v[1], index_path(path, 1))};
}

inline std::vector<Vec2> as_points(const json& v, const std::string& path, std::size_t count) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of [x, y]");
    if (v.size() != count) {
        throw ConfigError(path, "expected " + std::to_string(count) + " positions, got " +
                                    std::to_string(v.size()));
    }
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_point(v[i], index_path(path, i)));
    return out;
}

/// Parses "<value> <unit>" with unit W, mW or dBm into watts.
inline double as_power(const json& v, const std::string& path, bool allow_zero = false) {
    if (!v.is_string()) {
        throw ConfigError(path, "power needs an explicit unit, e.g. \"27.6 dBm\" or \"2.5 W\"");
    }
    const std::string& s = v.get_ref<const std::string&>();
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{}) throw ConfigError(path, "cannot parse power '" + s + "'");
    std::string_view unit(ptr, static_cast<std::size_t>(last - ptr));
    while (!unit.empty() && unit.front() == ' ') unit.remove_prefix(1);
    while (!unit.empty() && unit.back() == ' ') unit.remove_suffix(1);

    double watts = 0.0;
    if (unit == "W") {
        watts = value;
    } else if (unit == "mW") {
        watts = value * 1e-3;
    } else if (unit == "dBm") {
        watts = dbm_to_watts(value);
    } else {
        throw ConfigError(path, "unknown power unit '" + std::string(unit) + "' (use W, mW or dBm)");
    }
    const bool ok = allow_zero ? watts >= 0.0 : watts > 0.0;
    if (!ok || !std::isfinite(watts)) {
        throw ConfigError(path, allow_zero ? "power must be non-negative" : "power must be positive");
    }
    return watts;
}

/// Scalar (broadcast) or array of exactly `count` powers.
inline std::vector<double> power_list(const json& v, const std::string& path, std::size_t count,
                                      bool allow_zero = false) {
    if (!v.is_array()) return std::vector<double>(count, as_power(v, path, allow_zero));
    if (v.size() != count) {
        throw ConfigError(path, "expected " + std::to_string(count) + " entries, got " +
                                    std::to_string(v.size()));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(as_power(v[i], index_path(path, i), allow_zero));
    return out;
}

inline std::vector<double> rate_list(const json& v, const std::string& path, std::size_t count) {
    auto one = [&](const json& e, const std::string& p) {
        const double r = as_number(e, p);
        if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError(p, "rate must be non-negative");
        return r;
    };
    if (!v.is_array()) return std::vector<double>(count, one(v, path));
    if (v.size() != count) {
        throw ConfigError(path, "expected " + std::to_string(count) + " entries, got " +
                                    std::to_string(v.size()));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(one(v[i], index_path(path, i)));
    return out;
}

inline json point_json(Vec2 p) { return json::array({p.x, p.y}); }

inline json power_json(double watts) { return shortest(watts) + " W"; }

inline json power_list_json(const std::vector<double>& v) {
    json a = json::array();
    for (double w : v) a.push_back(power_json(w));
    return a;
}

inline const char* fading_name(FadingModel f) { return f == FadingModel::none ? "none" : "rayleigh"; }

}  // namespace detail

/// Builds a Scenario from a parsed configuration document, checking every field.
/// Throws ConfigError naming the first offending field.
inline Scenario validate_scenario(const nlohmann::json& doc) {
    using namespace detail;
    if (!doc.is_object()) throw ConfigError("<root>", "expected an object");

    static const char* const known[] = {
        "num_sus", "num_wus", "num_pus", "num_steps", "horizon_s", "step_s", "uav_height_m",
        "v_max_mps", "pbs_pos", "wifi_ap_pos", "pu_pos", "wu_pos", "su_pos", "q_start", "q_end",
        "p_max_lic", "p_max_unlic", "gamma_lic", "gamma_unlic", "r_min_bps_hz", "pbs_power",
        "wifi_power", "path_loss_exp", "ground_path_loss_exp", "beta0", "noise_power",
        "jammer_pos", "jammer_antennas", "jammer_power", "fading", "rng_seed", "comment"};
    for (const auto& [key, value] : doc.items()) {
        bool found = false;
        for (const char* k : known) found = found || key == k;
        if (!found) throw ConfigError(key, "unknown field");
    }

    Scenario sc;
    sc.num_sus = positive_count(require(doc, "num_sus"), "num_sus");
    sc.num_wus = positive_count(require(doc, "num_wus"), "num_wus");
    sc.num_pus = positive_count(require(doc, "num_pus"), "num_pus");
    sc.num_steps = positive_count(require(doc, "num_steps"), "num_steps");
    const std::size_t K = sc.num_sus, M = sc.num_wus, J = sc.num_pus, N = sc.num_steps;

    sc.horizon_s = positive_number(require(doc, "horizon_s"), "horizon_s");
    sc.step_s = sc.horizon_s / static_cast<double>(N);
    if (doc.contains("step_s")) {
        const double given = positive_number(doc["step_s"], "step_s");
        if (std::abs(given * static_cast<double>(N) - sc.horizon_s) > 1e-9 * sc.horizon_s) {
            throw ConfigError("step_s", "step_s * num_steps must equal horizon_s");
        }
    }
    sc.uav_height_m = positive_number(require(doc, "uav_height_m"), "uav_height_m");
    sc.v_max_mps = positive_number(require(doc, "v_max_mps"), "v_max_mps");

    sc.pbs_pos = as_point(require(doc, "pbs_pos"), "pbs_pos");
    sc.wifi_ap_pos = as_point(require(doc, "wifi_ap_pos"), "wifi_ap_pos");
    sc.pu_pos = as_points(require(doc, "pu_pos"), "pu_pos", J);
    sc.wu_pos = as_points(require(doc, "wu_pos"), "wu_pos", M);
    sc.su_pos = as_points(require(doc, "su_pos"), "su_pos", K);
    if (doc.contains("q_start")) sc.q_start = as_point(doc["q_start"], "q_start");
    if (doc.contains("q_end")) sc.q_end = as_point(doc["q_end"], "q_end");
    if (sc.q_start.has_value() != sc.q_end.has_value()) {
        throw ConfigError(sc.q_start ? "q_end" : "q_start", "q_start and q_end must be given together");
    }
    if (sc.q_start && N > 1) {
        const double reach = sc.max_step_m() * static_cast<double>(N - 1);
        if (!(norm(*sc.q_end - *sc.q_start) < reach)) {
            throw ConfigError("q_end", "not reachable from q_start within the speed limit");
        }
    }

    sc.p_max_lic_w = as_power(require(doc, "p_max_lic"), "p_max_lic");
    sc.p_max_unlic_w = as_power(require(doc, "p_max_unlic"), "p_max_unlic");
    sc.gamma_lic_w = power_list(require(doc, "gamma_lic"), "gamma_lic", J);
    sc.gamma_unlic_w = power_list(require(doc, "gamma_unlic"), "gamma_unlic", M);
    sc.r_min_bps_hz = rate_list(require(doc, "r_min_bps_hz"), "r_min_bps_hz", K);
    sc.pbs_power_w = power_list(require(doc, "pbs_power"), "pbs_power", J);
    sc.wifi_power_w = power_list(require(doc, "wifi_power"), "wifi_power", M);
    sc.noise_power_w = power_list(require(doc, "noise_power"), "noise_power", K);

    sc.path_loss_exp = as_number(require(doc, "path_loss_exp"), "path_loss_exp");
    if (!(sc.path_loss_exp > 2.0) || !std::isfinite(sc.path_loss_exp)) {
        throw ConfigError("path_loss_exp", "path_loss_exp must exceed 2");
    }
    if (doc.contains("ground_path_loss_exp")) {
        sc.ground_path_loss_exp = positive_number(doc["ground_path_loss_exp"], "ground_path_loss_exp");
    }
    sc.beta0 = positive_number(require(doc, "beta0"), "beta0");
    if (doc.contains("fading")) {
        const auto& f = doc["fading"];
        if (f == "rayleigh") {
            sc.fading = FadingModel::rayleigh;
        } else if (f == "none") {
            sc.fading = FadingModel::none;
        } else {
            throw ConfigError("fading", "expected \"rayleigh\" or \"none\"");
        }
    }

    sc.jammer_pos = as_point(require(doc, "jammer_pos"), "jammer_pos");
    sc.jammer_antennas = positive_count(require(doc, "jammer_antennas"), "jammer_antennas");
    sc.jammer_beam_power_w = Grid2<double>(K, N);
    const auto& jam = require(doc, "jammer_power");
    if (!jam.is_array()) {
        const double w = as_power(jam, "jammer_power", true);
        for (double& v : sc.jammer_beam_power_w.flat()) v = w;
    } else {
        if (jam.size() != K) {
            throw ConfigError("jammer_power", "expected " + std::to_string(K) + " rows, got " +
                                                  std::to_string(jam.size()));
        }
        for (std::size_t k = 0; k < K; ++k) {
            const std::string row_path = index_path("jammer_power", k);
            const auto row = power_list(jam[k], row_path, N, true);
            for (std::size_t n = 0; n < N; ++n) sc.jammer_beam_power_w(k, n) = row[n];
        }
    }

    if (doc.contains("rng_seed")) {
        const auto& s = doc["rng_seed"];
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
            throw ConfigError("rng_seed", "expected a non-negative integer");
        }
        sc.rng_seed = s.get<std::uint64_t>();
    }
    return sc;
}

/// Normalized document: every power in watts, every derived constant explicit.
/// validate_scenario(scenario_to_json(sc)) == sc bit-for-bit.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
    using namespace detail;
    json doc;
    doc["num_sus"] = sc.num_sus;
    doc["num_wus"] = sc.num_wus;
    doc["num_pus"] = sc.num_pus;
    doc["num_steps"] = sc.num_steps;
    doc["horizon_s"] = sc.horizon_s;
    doc["step_s"] = sc.step_s;
    doc["uav_height_m"] = sc.uav_height_m;
    doc["v_max_mps"] = sc.v_max_mps;
    doc["pbs_pos"] = point_json(sc.pbs_pos);
    doc["wifi_ap_pos"] = point_json(sc.wifi_ap_pos);
    auto points = [](const std::vector<Vec2>& ps) {
        json a = json::array();
        for (auto p : ps) a.push_back(point_json(p));
        return a;
    };
    doc["pu_pos"] = points(sc.pu_pos);
    doc["wu_pos"] = points(sc.wu_pos);
    doc["su_pos"] = points(sc.su_pos);
    if (sc.q_start) doc["q_start"] = point_json(*sc.q_start);
    if (sc.q_end) doc["q_end"] = point_json(*sc.q_end);
    doc["p_max_lic"] = power_json(sc.p_max_lic_w);
    doc["p_max_unlic"] = power_json(sc.p_max_unlic_w);
    doc["gamma_lic"] = power_list_json(sc.gamma_lic_w);
    doc["gamma_unlic"] = power_list_json(sc.gamma_unlic_w);
    doc["r_min_bps_hz"] = sc.r_min_bps_hz;
    doc["pbs_power"] = power_list_json(sc.pbs_power_w);
    doc["wifi_power"] = power_list_json(sc.wifi_power_w);
    doc["noise_power"] = power_list_json(sc.noise_power_w);
    doc["path_loss_exp"] = sc.path_loss_exp;
    doc["ground_path_loss_exp"] = sc.ground_path_loss_exp;
    doc["beta0"] = sc.beta0;
    doc["fading"] = fading_name(sc.fading);
    doc["jammer_pos"] = point_json(sc.jammer_pos);
    doc["jammer_antennas"] = sc.jammer_antennas;
    json jam = json::array();
    for (std::size_t k = 0; k < sc.num_sus; ++k) {
        json row = json::array();
        for (std::size_t n = 0; n < sc.num_steps; ++n) row.push_back(power_json(sc.jammer_beam_power_w(k, n)));
        jam.push_back(row);
    }
    doc["jammer_power"] = jam;
    doc["rng_seed"] = sc.rng_seed;
    return doc;
}

/// Parses configuration text (JSON with // and /* */ comments allowed).
inline nlohmann::json parse_config_text(const std::string& text) {
    try {
        return nlohmann::json::parse(text, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("<syntax>", e.what());
    }
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return validate_scenario(parse_config_text(buf.str()));
}

}  // namespace airshare
