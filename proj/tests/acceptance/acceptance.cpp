// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Usage: airshare_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "airshare/allocation.hpp"
#include "airshare/config.hpp"
#include "airshare/orchestrator.hpp"
#include "airshare/output.hpp"
#include "airshare/trajectory.hpp"
#include "support/brute_force.hpp"
#include "support/exhaustive.hpp"
#include "support/instances.hpp"
#include "support/micro.hpp"

namespace {

using namespace airshare;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Scenario default_scenario() { return load_scenario(std::string(AIRSHARE_SCENARIO_DIR) + "/default.cfg"); }

unsigned worker_count() {
    return std::max(1u, std::thread::hardware_concurrency());
}

RunConfig seeded(std::uint64_t seed) {
    RunConfig cfg;
    cfg.seed = seed;
    return cfg;
}

/// "Non-decreasing" up to solver round-off.
bool no_drop(double before, double after) { return after >= before - 1e-9 * std::abs(before); }

/// Runs collected for the feasibility criterion.
std::vector<RunResult> g_runs;

Verdict convergence_and_ordering() {
    const auto sc = default_scenario();
    int ordered = 0, converged = 0;
    double slowest = 0.0;
    std::string misses;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto runs = compare_schemes(sc, seeded(seed), worker_count());
        const auto& p = runs[0];
        if (p.converged && p.trace.size() <= 20) ++converged;
        bool best = true;
        for (std::size_t i = 1; i < runs.size(); ++i) best = best && p.sum_rate > runs[i].sum_rate;
        if (best) {
            ++ordered;
        } else {
            misses += fmt(" seed%llu", static_cast<unsigned long long>(seed));
        }
        for (const auto& r : runs) slowest = std::max(slowest, r.seconds);
        for (auto& r : runs) g_runs.push_back(std::move(r));
    }
    return {ordered >= 9 && converged == 10 && slowest < 60.0,
            fmt("ordering %d/10 (need 9)%s, converged within 20 outer iterations %d/10, slowest run %.1f s", ordered,
                misses.empty() ? "" : (" missed:" + misses).c_str(), converged, slowest)};
}

Verdict power_sweep() {
    const auto sc = with_parameter(default_scenario(), SweepParam::gamma_unlic, dbm_to_watts(-35.0));
    const std::vector<double> values{1.98, 2.2, 2.42, 2.64, 2.86, 3.08};
    const auto pts = sweep(SweepParam::p_max_unlic, values, sc, seeded(sc.rng_seed), 1, {Scheme::proposed});
    std::vector<double> rate;
    for (const auto& p : pts) rate.push_back(p.runs[0].sum_rate);
    bool monotone = true;
    for (std::size_t i = 1; i < rate.size(); ++i) monotone = monotone && no_drop(rate[i - 1], rate[i]);
    const double first = rate[1] - rate[0], last = rate[5] - rate[4];
    std::string series;
    for (double r : rate) series += fmt(" %.4f", r);
    return {monotone && last < first,
            fmt("rates%s; non-decreasing %s; gain first %.4f > last %.4f", series.c_str(), monotone ? "yes" : "no",
                first, last)};
}

Verdict threshold_sweep() {
    const auto sc = default_scenario();
    std::vector<double> dbm, values;
    for (double d = -50.0; d <= -20.0 + 1e-9; d += 2.5) {
        dbm.push_back(d);
        values.push_back(dbm_to_watts(d));
    }
    const auto pts = sweep(SweepParam::gamma_unlic, values, sc, seeded(sc.rng_seed), 1, {Scheme::proposed});
    bool monotone = true;
    for (std::size_t i = 1; i < pts.size(); ++i) monotone = monotone && no_drop(pts[i - 1].runs[0].sum_rate, pts[i].runs[0].sum_rate);
    const double cut = dbm.back() - 0.25 * (dbm.back() - dbm.front());
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (dbm[i] < cut) continue;
        lo = std::min(lo, pts[i].runs[0].sum_rate);
        hi = std::max(hi, pts[i].runs[0].sum_rate);
    }
    const double spread = (hi - lo) / hi;
    return {monotone && spread <= 0.01,
            fmt("gamma -50..-20 dBm (%zu points): %.4f -> %.4f; non-decreasing %s; top-quartile spread %.3f%%",
                pts.size(), pts.front().runs[0].sum_rate, pts.back().runs[0].sum_rate, monotone ? "yes" : "no",
                100.0 * spread)};
}

Verdict water_filling_kkt() {
    RandomStream rng(derive_seed(4, StreamTag::test_instances));
    int interior_lic = 0, interior_unl = 0, bad = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto sc = testing::random_instance(rng, 2, 2, 2, 3);
        const auto ch = realize_channels(sc, initial_trajectory(sc), sc.rng_seed);
        const std::size_t k = rng.index(2), c = rng.index(2), n = rng.index(3);
        auto ld = initial_licensed_dual(sc);
        for (double& w : ld.omega) w = rng.uniform() < 0.3 ? 0.0 : std::pow(10.0, rng.uniform(3.0, 9.0));
        for (double& t : ld.theta) t = std::pow(10.0, rng.uniform(-2.0, 1.0));
        for (double& l : ld.lambda) l = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.0, 5.0);
        auto ud = initial_unlicensed_dual(sc);
        for (double& l : ud.lambda) l = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.0, 5.0);
        for (double& m : ud.mu) m = rng.uniform() < 0.3 ? 0.0 : std::pow(10.0, rng.uniform(3.0, 8.0));
        for (double& v : ud.nu) v = std::pow(10.0, rng.uniform(-3.0, 0.0));

        // Per-pair Lagrangians written out directly from the relaxed sub-problems.
        const double N = static_cast<double>(sc.num_steps);
        const double lic_floor = ch.h_ps(k, n) * sc.pbs_power_w[c] + ch.jam_power_w(k, n) + sc.noise_power_w[k];
        const double lic_price = ld.omega[c] * ch.h_up(c, n) + ld.theta[n];
        auto lic = [&](double p) { return (1.0 + ld.lambda[k]) * std::log2(1.0 + ch.h_us(k, n) * p / lic_floor) - lic_price * p; };
        const double unl_floor = ch.h_ws(k, n) * sc.wifi_power_w[c] + ch.jam_power_w(k, n) + sc.noise_power_w[k];
        const double unl_price = ud.mu[c] * ch.h_uw(c, n) / N + ud.nu[n];
        auto unl = [&](double p) {
            return (1.0 + ud.lambda[k]) / N * std::log2(1.0 + ch.h_us(k, n) * p / unl_floor) - unl_price * p;
        };

        // Interior: the finite-difference slope vanishes. At a bound: it points outward.
        auto check = [&](double p, double p_max, double price, const std::function<double(double)>& L, int& count) {
            double rel = 0.0;
            if (p > 0.0 && p < p_max) {
                ++count;
                const double h = 1e-6 * p;
                rel = std::abs((L(p + h) - L(p - h)) / (2.0 * h)) / price;
            } else if (p <= 0.0) {
                const double h = 1e-9 * p_max;
                rel = std::max(0.0, (L(h) - L(0.0)) / h) / price;
            } else {
                const double h = 1e-9 * p_max;
                rel = std::max(0.0, (L(p_max - h) - L(p_max)) / h) / price;
            }
            worst = std::max(worst, rel);
            if (rel > 1e-6) ++bad;
        };
        check(optimal_licensed_power(k, c, n, ld, ch, sc), sc.p_max_lic_w, lic_price, lic, interior_lic);
        check(optimal_unlicensed_power(k, c, n, ud, ch, sc), sc.p_max_unlic_w, unl_price, unl, interior_unl);
    }
    return {bad == 0,
            fmt("1000 tuples per formula (interior licensed %d, unlicensed %d; the rest checked for the bound sign), "
                "violations %d, worst relative slope %.2e",
                interior_lic, interior_unl, bad, worst)};
}

Verdict assignment_optimality() {
    RandomStream rng(derive_seed(5, StreamTag::test_instances));
    int mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t rows = 1 + rng.index(6), cols = 1 + rng.index(6);
        Grid2<double> u(rows, cols);
        // Integer utilities make "exactly" exact; every other matrix is continuous.
        for (double& v : u.flat()) {
            v = trial % 2 == 0 ? static_cast<double>(static_cast<int>(rng.index(151)) - 50) : rng.uniform(-1.0, 1.0);
        }
        const auto a = max_utility_assignment(u);
        std::set<int> used;
        double total = 0.0;
        bool valid = true;
        for (std::size_t r = 0; r < rows; ++r) {
            const int c = a.row_to_col[r];
            if (c < 0) continue;
            valid = valid && used.insert(c).second;
            total += u(r, static_cast<std::size_t>(c));
        }
        const double best = testing::exhaustive_matching_value(u);
        const bool same = trial % 2 == 0 ? total == best : std::abs(total - best) <= 1e-12;
        if (!valid || !same) ++mismatches;
    }
    return {mismatches == 0, fmt("500 matrices up to 6x6, mismatches %d", mismatches)};
}

Verdict brute_force_equivalence() {
    RandomStream rng(derive_seed(123, StreamTag::test_instances));
    int trials = 0, below = 0, infeasible_draws = 0;
    double worst = INFINITY;
    while (trials < 100) {
        auto sc = testing::random_instance(rng, 2, 2, 2, 1);
        for (double& r : sc.r_min_bps_hz) r = rng.uniform(0.0, 3.0);
        const auto traj = hover_trajectory(sc);
        const auto ch = realize_channels(sc, traj, sc.rng_seed);
        const double opt = testing::brute_force_optimum(ch, sc, 50);
        if (!std::isfinite(opt)) {
            ++infeasible_draws;  // floors out of reach even on the grid; redraw
            continue;
        }
        ++trials;
        const auto res = solve_allocation(traj, ch, sc);
        const auto rep = check_constraints(res.plan, traj, ch, sc);
        const bool ok_constraints = rep.max_violation() <= 1e-6 && rep.c1_shortfall <= 1e-6;
        const double ratio = ok_constraints ? sum_rate(res.plan, ch, sc) / opt : 0.0;
        worst = std::min(worst, ratio);
        if (ratio < 0.99) ++below;
    }
    return {below == 0, fmt("K=J=M=2, N=1, 50-level grid, R_min~U[0,3]: %d/100 below 99%% (worst ratio %.4f, %d "
                            "infeasible draws skipped)",
                            below, worst, infeasible_draws)};
}

Verdict sca_soundness() {
    RandomStream rng(derive_seed(7, StreamTag::test_instances));
    int bound_fail = 0, tight_fail = 0;
    double worst_gap = -INFINITY;
    for (int eval = 0; eval < 200; ++eval) {
        const auto sc = testing::random_instance(rng, 2, 2, 2, 2);
        const auto t = initial_trajectory(sc);
        const auto ch = realize_channels(sc, t, sc.rng_seed);
        const auto plan = solve_allocation(t, ch, sc).plan;
        const std::size_t k = rng.index(2), n = rng.index(2);
        const Vec2 qi = t.q[n] + Vec2{rng.uniform(-80.0, 80.0), rng.uniform(-80.0, 80.0)};
        const double r = 50.0 * std::sqrt(rng.uniform()), a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const Vec2 q = qi + Vec2{r * std::cos(a), r * std::sin(a)};
        const double gap = surrogate_rate(k, n, q, qi, plan, ch, sc) - rate_at(k, n, q, plan, ch, sc);
        worst_gap = std::max(worst_gap, gap);
        if (gap > 1e-9) ++bound_fail;
        if (std::abs(surrogate_rate(k, n, qi, qi, plan, ch, sc) - rate_at(k, n, qi, plan, ch, sc)) > 1e-12) ++tight_fail;
    }

    int runs = 0, non_monotone = 0;
    auto check_trace = [&](const TrajectoryResult& tr) {
        ++runs;
        for (std::size_t i = 1; i < tr.trace.size(); ++i) {
            if (tr.trace[i].true_value < tr.trace[i - 1].true_value) {
                ++non_monotone;
                return;
            }
        }
    };
    for (int trial = 0; trial < 20; ++trial) {
        auto sc = testing::random_instance(rng, 3, 2, 2, 6);
        for (double& rm : sc.r_min_bps_hz) rm = rng.uniform(0.0, 1.0);
        const auto t = initial_trajectory(sc);
        const auto ch = realize_channels(sc, t, sc.rng_seed);
        check_trace(optimize_trajectory(t, solve_allocation(t, ch, sc).plan, ch, sc));
    }
    // Trajectory blocks of the convergence runs: their trace rows are "trajectory" events.
    for (const auto& r : g_runs) {
        ++runs;
        double prev = -INFINITY;
        int outer = -1;
        for (const auto& e : r.events) {
            if (e.block != "trajectory") continue;
            if (e.outer != outer) {
                outer = e.outer;
                prev = -INFINITY;
            }
            if (e.value < prev) {
                ++non_monotone;
                break;
            }
            prev = e.value;
        }
    }

    const auto micro = testing::line_instance();
    const double grid = testing::line_grid_optimum(micro);
    const auto solved = optimize_trajectory(Trajectory{{{120.0, 0.0}, {120.0, 0.0}}}, micro.plan, micro.ch, micro.sc);
    const double ratio = solved.value / grid;

    return {bound_fail == 0 && tight_fail == 0 && non_monotone == 0 && ratio >= 0.995,
            fmt("200 surrogate checks: bound failures %d (max surrogate-true %.2e), tightness failures %d; "
                "non-monotone SCA traces %d of %d runs; N=2 micro-instance %.5f vs grid %.5f (%.3f%%)",
                bound_fail, worst_gap, tight_fail, non_monotone, runs, solved.value, grid, 100.0 * ratio)};
}

Verdict feasibility() {
    if (g_runs.empty()) {
        const auto sc = default_scenario();
        for (auto& r : compare_schemes(sc, seeded(sc.rng_seed), worker_count())) g_runs.push_back(std::move(r));
    }
    // Random instances with floors, some of them unreachable.
    RandomStream rng(derive_seed(8, StreamTag::test_instances));
    for (int trial = 0; trial < 10; ++trial) {
        auto sc = testing::random_instance(rng, 3, 2, 2, 5);
        for (double& rm : sc.r_min_bps_hz) rm = rng.uniform(0.0, trial % 3 == 0 ? 20.0 : 2.0);
        for (auto& r : compare_schemes(sc, seeded(trial + 1), worker_count())) g_runs.push_back(std::move(r));
    }
    int violations = 0, c1_miss = 0, c1_unreported = 0;
    double worst = 0.0;
    for (const auto& r : g_runs) {
        const double v = r.report.max_violation();
        worst = std::max(worst, v);
        if (v > 1e-6) ++violations;
        if (r.report.c1_shortfall > 1e-6) {
            ++c1_miss;
            double listed = 0.0;
            for (double s : r.report.rate_shortfall) listed = std::max(listed, s);
            if (!(listed > 1e-6)) ++c1_unreported;
        }
    }
    return {violations == 0 && c1_unreported == 0,
            fmt("%zu plans: C2-C11 worst relative violation %.2e (%d over 1e-6); C1 missed in %d, all with a "
                "per-SU shortfall diagnostic: %s",
                g_runs.size(), worst, violations, c1_miss, c1_unreported == 0 ? "yes" : "no")};
}

std::string file_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict determinism() {
    const auto sc = load_scenario(std::string(AIRSHARE_SCENARIO_DIR) + "/small.cfg");
    const auto dir = std::filesystem::temp_directory_path() / "airshare_acceptance_determinism";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    std::vector<std::string> names;
    std::vector<std::string> contents[2];
    const unsigned threads[2] = {1, 4};
    for (int t = 0; t < 2; ++t) {
        std::vector<ResultRow> finals, iters;
        std::vector<RunResult> all;
        for (std::uint64_t seed : {3, 4}) {
            for (auto& r : compare_schemes(sc, seeded(seed), threads[t])) all.push_back(std::move(r));
        }
        const auto gamma = {dbm_to_watts(-45.0), dbm_to_watts(-40.0), dbm_to_watts(-35.0)};
        const auto pts = sweep(SweepParam::gamma_unlic, gamma, sc, seeded(3), threads[t]);
        for (const auto& p : pts) {
            for (const auto& r : p.runs) finals.push_back(final_row(r, "gamma_unlic", watts_to_dbm(p.value), false));
        }
        for (const auto& r : all) {
            finals.push_back(final_row(r, "none", 0.0, false));
            for (auto& row : iteration_rows(r, "none", 0.0)) iters.push_back(row);
        }
        const auto base = dir / std::to_string(threads[t]);
        std::filesystem::create_directories(base);
        write_results_csv(base / "results.csv", finals);
        write_results_csv(base / "iterations.csv", iters);
        for (const auto& r : all) {
            write_trace_csv(base / ("trace_" + std::string(scheme_name(r.scheme)) + "_s" + std::to_string(r.seed) + ".csv"), r);
        }
        for (const auto& entry : std::filesystem::directory_iterator(base)) {
            if (t == 0) names.push_back(entry.path().filename().string());
        }
        std::sort(names.begin(), names.end());
        for (const auto& n : names) contents[t].push_back(file_text(base / n));
    }
    std::filesystem::remove_all(dir);
    int differ = 0;
    for (std::size_t i = 0; i < names.size(); ++i) differ += contents[0][i] != contents[1][i];
    return {differ == 0 && !names.empty(),
            fmt("%zu CSV files (2 seeds x 5 schemes plus a 3-point sweep), threads 1 vs 4: %d differ", names.size(),
                differ)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Verdict (*)()>> criteria{
        {"convergence and scheme ordering", convergence_and_ordering},
        {"sum rate vs unlicensed power budget", power_sweep},
        {"sum rate vs unlicensed interference threshold", threshold_sweep},
        {"water-filling stationarity", water_filling_kkt},
        {"assignment optimality", assignment_optimality},
        {"brute-force equivalence", brute_force_equivalence},
        {"SCA soundness", sca_soundness},
        {"feasibility", feasibility},
        {"determinism across thread counts", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %d (%s): %s - %s [%.1f s]\n", id, criteria[i].first, v.pass ? "PASS" : "FAIL",
                    v.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !v.pass;
    }
    return failed == 0 ? 0 : 1;
}
