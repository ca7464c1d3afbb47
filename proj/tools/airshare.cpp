// Command-line front end: validate scenarios, run one scheme, compare all five, sweep a
// parameter, dump channel gains, or repeat a previous invocation from its manifest.

#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "airshare/config.hpp"
#include "airshare/output.hpp"

#ifndef AIRSHARE_VERSION
#define AIRSHARE_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace airshare;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

unsigned default_threads() {
    if (const char* env = std::getenv("AIRSHARE_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw ConfigError("AIRSHARE_THREADS", "expected a positive integer, got '" + std::string(env) + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Files go to a hidden sibling directory that is renamed into place once everything is
/// written, so the output directory appears complete or not at all.
class OutputDir {
public:
    OutputDir(const fs::path& target, bool force) : target_(fs::absolute(target)), force_(force) {
        if (fs::exists(target_) && !force_) {
            throw ConfigError("--out", "'" + target.string() + "' already exists (pass --force to replace it)");
        }
        fs::create_directories(target_.parent_path());
        staging_ = target_.parent_path() /
                   ("." + target_.filename().string() + ".partial-" + std::to_string(::getpid()));
        fs::remove_all(staging_);
        fs::create_directory(staging_);
    }
    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;
    ~OutputDir() {
        std::error_code ec;
        if (!committed_) fs::remove_all(staging_, ec);
    }

    fs::path file(const std::string& name) const { return staging_ / name; }
    const fs::path& target() const { return target_; }

    void commit() {
        if (force_) fs::remove_all(target_);
        fs::rename(staging_, target_);
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path staging_;
    bool force_ = false;
    bool committed_ = false;
};

RunConfig make_run_config(const nlohmann::json& overrides, std::uint64_t seed) {
    RunConfig cfg;
    cfg.seed = seed;
    if (overrides.contains("max_outer_iters")) cfg.max_outer_iters = overrides["max_outer_iters"].get<int>();
    if (overrides.contains("outer_tol")) cfg.outer_tol = overrides["outer_tol"].get<double>();
    if (overrides.contains("max_dual_iters")) cfg.dual.max_dual_iters = overrides["max_dual_iters"].get<int>();
    if (overrides.contains("max_sca_iters")) cfg.trajectory.max_sca_iters = overrides["max_sca_iters"].get<int>();
    return cfg;
}

std::string run_tag(Scheme s, std::uint64_t seed) {
    return std::string(scheme_name(s)) + "_s" + std::to_string(seed);
}

void write_run_files(const OutputDir& dir, const RunResult& r, const std::string& tag) {
    write_trace_csv(dir.file("trace_" + tag + ".csv"), r);
    write_trajectory_dat(dir.file("trajectory_" + tag + ".dat"), r.trajectory);
}

std::vector<Scheme> manifest_schemes(const RunManifest& m) {
    std::vector<Scheme> out;
    for (const auto& s : m.schemes) out.push_back(parse_scheme(s));
    return out;
}

void execute_runs(const RunManifest& m, const Scenario& sc, unsigned threads, const OutputDir& dir) {
    const auto schemes = manifest_schemes(m);
    const std::size_t S = schemes.size();
    std::vector<RunResult> results(m.seeds.size() * S);
    run_parallel(results.size(), threads, [&](std::size_t i) {
        results[i] = alternate_optimize(sc, make_run_config(m.overrides, m.seeds[i / S]), schemes[i % S]);
    });

    std::vector<ResultRow> finals, iters;
    std::vector<std::vector<const RunResult*>> by_scheme(S);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        finals.push_back(final_row(r, "none", 0.0, m.timing));
        for (auto& row : iteration_rows(r, "none", 0.0)) iters.push_back(std::move(row));
        by_scheme[i % S].push_back(&r);
        const auto tag = run_tag(r.scheme, r.seed);
        write_run_files(dir, r, tag);
        if (m.overrides.value("dump_channels", false)) {
            write_channels_dat(dir.file("channels_" + tag + ".dat"), realize_channels(sc, r.trajectory, r.seed));
        }
    }
    write_results_csv(dir.file("results.csv"), finals);
    write_results_csv(dir.file("iterations.csv"), iters);
    write_iteration_dat(dir.file(m.command == "compare" ? "fig2a.dat" : "iterations.dat"), schemes, by_scheme);
}

void execute_sweep(const RunManifest& m, const Scenario& sc, unsigned threads, const OutputDir& dir) {
    const auto schemes = manifest_schemes(m);
    const auto param = parse_sweep_param(m.sweep.at("param").get<std::string>());
    const auto values = m.sweep.at("values").get<std::vector<double>>();
    std::vector<double> watts;
    for (double v : values) watts.push_back(param == SweepParam::gamma_unlic ? dbm_to_watts(v) : v);

    std::vector<std::vector<double>> mean(values.size(), std::vector<double>(schemes.size(), 0.0));
    std::vector<ResultRow> finals, iters;
    const std::string pname(sweep_param_name(param));
    for (std::uint64_t seed : m.seeds) {
        const auto points = sweep(param, watts, sc, make_run_config(m.overrides, seed), threads, schemes);
        for (std::size_t v = 0; v < points.size(); ++v) {
            for (std::size_t s = 0; s < schemes.size(); ++s) {
                const auto& r = points[v].runs[s];
                finals.push_back(final_row(r, pname, values[v], m.timing));
                for (auto& row : iteration_rows(r, pname, values[v])) iters.push_back(std::move(row));
                mean[v][s] += r.sum_rate / static_cast<double>(m.seeds.size());
                write_run_files(dir, r, run_tag(r.scheme, seed) + "_p" + std::to_string(v));
            }
        }
    }
    write_results_csv(dir.file("results.csv"), finals);
    write_results_csv(dir.file("iterations.csv"), iters);
    write_sweep_dat(dir.file(param == SweepParam::p_max_unlic ? "fig2b.dat" : "fig2c.dat"),
                    param == SweepParam::p_max_unlic ? "p_max_unlic_w" : "gamma_unlic_dbm", schemes, values, mean);
}

void execute_dump(const RunManifest& m, const Scenario& sc, const OutputDir& dir) {
    const auto scheme = parse_scheme(m.schemes.at(0));
    for (std::uint64_t seed : m.seeds) {
        const auto traj = detail::scheme_start(scheme, sc, seed);
        write_channels_dat(dir.file("channels_s" + std::to_string(seed) + ".dat"), realize_channels(sc, traj, seed));
        write_trajectory_dat(dir.file("trajectory_s" + std::to_string(seed) + ".dat"), traj);
    }
}

/// Writes the manifest first, then every output, then moves the directory into place.
int execute(RunManifest m, unsigned threads, const fs::path& out, bool force) {
    const Scenario sc = validate_scenario(m.scenario);
    OutputDir dir(out, force);
    m.output_dir = dir.target().string();
    m.timestamp = utc_timestamp();
    m.tool_version = AIRSHARE_VERSION;
    {
        std::ofstream mf(dir.file("manifest.json"), std::ios::binary);
        mf << manifest_to_json(m).dump(2) << '\n';
        if (!mf) throw std::runtime_error("cannot write manifest");
    }
    if (m.command == "sweep") {
        execute_sweep(m, sc, threads, dir);
    } else if (m.command == "dump-channels") {
        execute_dump(m, sc, dir);
    } else {
        execute_runs(m, sc, threads, dir);
    }
    dir.commit();
    std::cout << "wrote " << dir.target().string() << '\n';
    return 0;
}

struct CommonOptions {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    int seeds = 1;
    std::optional<unsigned> threads;
    std::string out;
    bool force = false;
    bool timing = false;
    std::optional<int> max_outer;
    std::optional<double> outer_tol;
    std::optional<int> max_dual;
    std::optional<int> max_sca;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_solver) {
    cmd->add_option("--scenario,-s", o.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Base seed (default: the scenario's rng_seed)");
    cmd->add_option("--seeds", o.seeds, "Number of consecutive seeds to repeat over")->check(CLI::PositiveNumber);
    cmd->add_option("--out,-o", o.out, "Output directory")->required();
    cmd->add_flag("--force", o.force, "Replace an existing output directory");
    if (!with_solver) return;
    cmd->add_option("--threads,-j", o.threads, "Worker threads (default: AIRSHARE_THREADS, then core count)")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--timing", o.timing, "Record wall-clock seconds in results.csv (otherwise 0)");
    cmd->add_option("--max-outer", o.max_outer, "Outer iteration cap")->check(CLI::PositiveNumber);
    cmd->add_option("--outer-tol", o.outer_tol, "Relative outer improvement that stops the loop")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-dual", o.max_dual, "Dual iteration cap per band")->check(CLI::PositiveNumber);
    cmd->add_option("--max-sca", o.max_sca, "SCA iteration cap per trajectory solve")->check(CLI::PositiveNumber);
}

RunManifest base_manifest(const std::string& command, const CommonOptions& o) {
    RunManifest m;
    m.command = command;
    m.scenario_path = fs::absolute(o.scenario).string();
    const Scenario sc = load_scenario(o.scenario);
    m.scenario = scenario_to_json(sc);
    const std::uint64_t base = o.seed ? *o.seed : sc.rng_seed;
    for (int i = 0; i < o.seeds; ++i) m.seeds.push_back(base + static_cast<std::uint64_t>(i));
    if (o.max_outer) m.overrides["max_outer_iters"] = *o.max_outer;
    if (o.outer_tol) m.overrides["outer_tol"] = *o.outer_tol;
    if (o.max_dual) m.overrides["max_dual_iters"] = *o.max_dual;
    if (o.max_sca) m.overrides["max_sca_iters"] = *o.max_sca;
    m.timing = o.timing;
    return m;
}

std::vector<double> sweep_values(double from, double to, int points) {
    if (points < 1) throw ConfigError("--points", "must be at least 1");
    if (points == 1) return {from};
    if (!(to > from)) throw ConfigError("--to", "must be larger than --from");
    std::vector<double> v;
    for (int i = 0; i < points; ++i) {
        v.push_back(i + 1 == points ? to : from + (to - from) * static_cast<double>(i) / (points - 1));
    }
    return v;
}

std::vector<std::string> split_schemes(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item.empty()) continue;
        parse_scheme(item);
        out.push_back(item);
    }
    if (out.empty()) throw ConfigError("--schemes", "no scheme given");
    return out;
}

std::vector<std::string> all_scheme_names() {
    std::vector<std::string> v;
    for (Scheme s : kAllSchemes) v.emplace_back(scheme_name(s));
    return v;
}

int report_config_error(const std::string& what) {
    std::cerr << "error: " << what << '\n';
    return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint spectrum, power and trajectory optimization for a jammed UAV network"};
    app.set_version_flag("--version", AIRSHARE_VERSION);
    app.require_subcommand(1);

    std::string validate_path;
    bool print_normalized = false;
    auto* validate = app.add_subcommand("validate", "Check a scenario file and report problems by field path");
    validate->add_option("file", validate_path, "Scenario file")->required();
    validate->add_flag("--print", print_normalized, "Print the normalized scenario (all powers in W)");

    CommonOptions run_opt;
    std::string scheme_name_arg = "proposed";
    bool dump_channels = false;
    auto* run = app.add_subcommand("run", "Run one scheme");
    add_common(run, run_opt, true);
    run->add_option("--scheme", scheme_name_arg, "proposed | random-unlicensed | lte-a | j-ap-hover | j-ap-fixed");
    run->add_flag("--dump-channels", dump_channels, "Also write the channel gains of the final trajectory");

    CommonOptions cmp_opt;
    auto* compare = app.add_subcommand("compare", "Run all five schemes (iteration traces)");
    add_common(compare, cmp_opt, true);

    CommonOptions sw_opt;
    std::string sw_param;
    double sw_from = 0.0, sw_to = 0.0;
    int sw_points = 1;
    std::string sw_schemes;
    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep p_max_unlic (W) or gamma_unlic (dBm)");
    add_common(sweep_cmd, sw_opt, true);
    sweep_cmd->add_option("--param", sw_param, "p_max_unlic | gamma_unlic")->required();
    sweep_cmd->add_option("--from", sw_from, "First value (W for p_max_unlic, dBm for gamma_unlic)")->required();
    sweep_cmd->add_option("--to", sw_to, "Last value, same unit as --from");
    sweep_cmd->add_option("--points", sw_points, "Number of evenly spaced values")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--schemes", sw_schemes, "Comma-separated subset of schemes (default: all)");

    CommonOptions dump_opt;
    std::string dump_scheme = "proposed";
    auto* dump = app.add_subcommand("dump-channels", "Write every channel gain for a scheme's starting trajectory");
    add_common(dump, dump_opt, false);
    dump->add_option("--scheme", dump_scheme, "Scheme whose starting trajectory is used");

    std::string rerun_manifest, rerun_out;
    std::optional<unsigned> rerun_threads;
    bool rerun_force = false;
    auto* rerun = app.add_subcommand("rerun", "Repeat the invocation recorded in a manifest.json");
    rerun->add_option("manifest", rerun_manifest, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
    rerun->add_option("--out,-o", rerun_out, "Output directory")->required();
    rerun->add_option("--threads,-j", rerun_threads, "Worker threads")->check(CLI::PositiveNumber);
    rerun->add_flag("--force", rerun_force, "Replace an existing output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*validate) {
            const Scenario sc = load_scenario(validate_path);
            if (print_normalized) {
                std::cout << scenario_to_json(sc).dump(2) << '\n';
            } else {
                std::cout << "ok: K=" << sc.num_sus << " J=" << sc.num_pus << " M=" << sc.num_wus
                          << " N=" << sc.num_steps << '\n';
            }
            return 0;
        }
        if (*run) {
            auto m = base_manifest("run", run_opt);
            parse_scheme(scheme_name_arg);
            m.schemes = {scheme_name_arg};
            if (dump_channels) m.overrides["dump_channels"] = true;
            return execute(m, run_opt.threads.value_or(default_threads()), run_opt.out, run_opt.force);
        }
        if (*compare) {
            auto m = base_manifest("compare", cmp_opt);
            m.schemes = all_scheme_names();
            return execute(m, cmp_opt.threads.value_or(default_threads()), cmp_opt.out, cmp_opt.force);
        }
        if (*sweep_cmd) {
            auto m = base_manifest("sweep", sw_opt);
            parse_sweep_param(sw_param);
            m.schemes = sw_schemes.empty() ? all_scheme_names() : split_schemes(sw_schemes);
            const auto values = sweep_values(sw_from, sw_points == 1 ? sw_from : sw_to, sw_points);
            m.sweep = {{"param", sw_param}, {"from", sw_from}, {"to", sw_to}, {"points", sw_points}, {"values", values}};
            return execute(m, sw_opt.threads.value_or(default_threads()), sw_opt.out, sw_opt.force);
        }
        if (*dump) {
            auto m = base_manifest("dump-channels", dump_opt);
            parse_scheme(dump_scheme);
            m.schemes = {dump_scheme};
            return execute(m, 1, dump_opt.out, dump_opt.force);
        }
        if (*rerun) {
            std::ifstream in(rerun_manifest);
            std::stringstream buf;
            buf << in.rdbuf();
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(buf.str());
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("<manifest>", e.what());
            }
            RunManifest m;
            try {
                m = manifest_from_json(doc);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("<manifest>", e.what());
            }
            return execute(m, rerun_threads.value_or(default_threads()), rerun_out, rerun_force);
        }
    } catch (const ConfigError& e) {
        return report_config_error(e.what());
    } catch (const std::invalid_argument& e) {
        return report_config_error(e.what());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
