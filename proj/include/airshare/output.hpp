#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "airshare/channel.hpp"
#include "airshare/orchestrator.hpp"

namespace airshare {

/// Bumped whenever a column is added, removed or reordered in any CSV or .dat file.
inline constexpr int kOutputFormatVersion = 1;

/// 12 significant digits, shortest form, independent of the C++ and C locales.
inline std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    return std::string(buf, r.ptr);
}

inline const std::vector<std::string_view>& result_columns() {
    static const std::vector<std::string_view> cols{"scheme",  "param", "value",     "iter",
                                                    "sum_rate", "max_violation", "seconds", "seed",
                                                    "converged", "c1_shortfall"};
    return cols;
}

/// One line of results.csv (final state of a run) or iterations.csv (one outer iteration).
struct ResultRow {
    std::string scheme;
    std::string param = "none";
    double value = 0.0;
    int iter = 0;
    double sum_rate = 0.0;
    double max_violation = 0.0;
    double seconds = 0.0;
    std::uint64_t seed = 0;
    bool converged = false;
    double c1_shortfall = 0.0;
};

/// Wall-clock seconds are only recorded when asked for, so repeated runs give identical files.
inline ResultRow final_row(const RunResult& r, std::string_view param, double value, bool timing) {
    ResultRow row;
    row.scheme = std::string(scheme_name(r.scheme));
    row.param = std::string(param);
    row.value = value;
    row.iter = static_cast<int>(r.trace.size());
    row.sum_rate = r.sum_rate;
    row.max_violation = r.report.max_violation();
    row.seconds = timing ? r.seconds : 0.0;
    row.seed = r.seed;
    row.converged = r.converged;
    row.c1_shortfall = r.report.c1_shortfall;
    return row;
}

inline std::vector<ResultRow> iteration_rows(const RunResult& r, std::string_view param, double value) {
    std::vector<ResultRow> rows;
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        ResultRow row;
        row.scheme = std::string(scheme_name(r.scheme));
        row.param = std::string(param);
        row.value = value;
        row.iter = static_cast<int>(i) + 1;
        row.sum_rate = r.trace[i];
        row.max_violation = r.trace_violation[i];
        row.seed = r.seed;
        row.converged = r.converged && i + 1 == r.trace.size();
        rows.push_back(row);
    }
    return rows;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

inline void close_output(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
    auto out = detail::open_output(path);
    const auto& cols = result_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : rows) {
        out << r.scheme << ',' << r.param << ',' << format_number(r.value) << ',' << r.iter << ','
            << format_number(r.sum_rate) << ',' << format_number(r.max_violation) << ',' << format_number(r.seconds)
            << ',' << r.seed << ',' << (r.converged ? 1 : 0) << ',' << format_number(r.c1_shortfall) << '\n';
    }
    detail::close_output(out, path);
}

/// Every block's inner iterations plus one "outer" row per outer iteration.
inline void write_trace_csv(const std::filesystem::path& path, const RunResult& r) {
    auto out = detail::open_output(path);
    out << "outer,block,inner,value,bound,kkt,violation\n";
    for (const auto& e : r.events) {
        out << e.outer << ',' << e.block << ',' << e.inner << ',' << format_number(e.value) << ','
            << format_number(e.bound) << ',' << format_number(e.kkt) << ',' << format_number(e.violation) << '\n';
    }
    detail::close_output(out, path);
}

/// Sum rate per outer iteration, one column per scheme, averaged over the runs given for it.
/// A run that stopped early keeps its final value, so all columns span the longest run.
inline void write_iteration_dat(const std::filesystem::path& path, const std::vector<Scheme>& schemes,
                                const std::vector<std::vector<const RunResult*>>& runs) {
    std::size_t rows = 0;
    for (const auto& per : runs) {
        for (const RunResult* r : per) rows = std::max(rows, r->trace.size());
    }
    auto out = detail::open_output(path);
    out << "iter";
    for (Scheme s : schemes) out << ' ' << scheme_name(s);
    out << '\n';
    for (std::size_t i = 0; i < rows; ++i) {
        out << i + 1;
        for (const auto& per : runs) {
            double acc = 0.0;
            for (const RunResult* r : per) acc += r->trace.empty() ? 0.0 : r->trace[std::min(i, r->trace.size() - 1)];
            out << ' ' << format_number(per.empty() ? 0.0 : acc / static_cast<double>(per.size()));
        }
        out << '\n';
    }
    detail::close_output(out, path);
}

/// Final sum rate per sweep value, one column per scheme, averaged over the seeds.
inline void write_sweep_dat(const std::filesystem::path& path, std::string_view param,
                            const std::vector<Scheme>& schemes, const std::vector<double>& values,
                            const std::vector<std::vector<double>>& mean_rate) {
    auto out = detail::open_output(path);
    out << param;
    for (Scheme s : schemes) out << ' ' << scheme_name(s);
    out << '\n';
    for (std::size_t v = 0; v < values.size(); ++v) {
        out << format_number(values[v]);
        for (double r : mean_rate[v]) out << ' ' << format_number(r);
        out << '\n';
    }
    detail::close_output(out, path);
}

inline void write_trajectory_dat(const std::filesystem::path& path, const Trajectory& t) {
    auto out = detail::open_output(path);
    out << "step x y\n";
    for (std::size_t n = 0; n < t.q.size(); ++n) {
        out << n << ' ' << format_number(t.q[n].x) << ' ' << format_number(t.q[n].y) << '\n';
    }
    detail::close_output(out, path);
}

/// Every |h|^2 array in long form: link, node index, step, gain, fading factor.
inline void write_channels_dat(const std::filesystem::path& path, const ChannelRealization& ch) {
    auto out = detail::open_output(path);
    out << "link index step gain fading\n";
    auto emit = [&](std::string_view link, const Grid2<double>& g, const Grid2<double>* f) {
        for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t n = 0; n < g.cols(); ++n) {
                out << link << ' ' << i << ' ' << n << ' ' << format_number(g(i, n)) << ' '
                    << format_number(f ? (*f)(i, n) : 1.0) << '\n';
            }
        }
    };
    emit("uav_su", ch.h_us, &ch.fading.us);
    emit("pbs_su", ch.h_ps, &ch.fading.ps);
    emit("ap_su", ch.h_ws, &ch.fading.ws);
    emit("uav_pu", ch.h_up, &ch.fading.up);
    emit("uav_wu", ch.h_uw, &ch.fading.uw);
    emit("jam_su", ch.jam_power_w, nullptr);
    detail::close_output(out, path);
}

/// Everything needed to repeat a CLI invocation. The scenario is embedded in normalized
/// form, so a re-run does not depend on the original file still being around.
struct RunManifest {
    std::string command;  // run | compare | sweep | dump-channels
    std::string scenario_path;
    nlohmann::json scenario;
    nlohmann::json overrides = nlohmann::json::object();
    std::vector<std::string> schemes;
    nlohmann::json sweep = nullptr;  // {param, from, to, points, values} for sweeps
    std::vector<std::uint64_t> seeds;
    std::string output_dir;
    std::string tool_version;
    std::string timestamp;
    bool timing = false;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json j;
    j["format_version"] = kOutputFormatVersion;
    j["tool"] = "airshare";
    j["tool_version"] = m.tool_version;
    j["timestamp"] = m.timestamp;
    j["command"] = m.command;
    j["scenario_path"] = m.scenario_path;
    j["scenario"] = m.scenario;
    j["overrides"] = m.overrides;
    j["schemes"] = m.schemes;
    j["sweep"] = m.sweep;
    j["seeds"] = m.seeds;
    j["output_dir"] = m.output_dir;
    j["timing"] = m.timing;
    j["columns"] = {{"results.csv", result_columns()},
                    {"iterations.csv", result_columns()},
                    {"trace", {"outer", "block", "inner", "value", "bound", "kkt", "violation"}}};
    return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    if (j.value("format_version", 0) != kOutputFormatVersion) {
        throw ConfigError("format_version", "unsupported manifest format");
    }
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.scenario_path = j.value("scenario_path", "");
    m.scenario = j.at("scenario");
    m.overrides = j.value("overrides", nlohmann::json::object());
    m.schemes = j.value("schemes", std::vector<std::string>{});
    m.sweep = j.value("sweep", nlohmann::json());
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.output_dir = j.value("output_dir", "");
    m.tool_version = j.value("tool_version", "");
    m.timing = j.value("timing", false);
    return m;
}

}  // namespace airshare
