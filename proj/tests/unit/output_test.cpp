#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "airshare/config.hpp"
#include "airshare/output.hpp"
#include "support/instances.hpp"

namespace airshare {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

class OutputFiles : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("airshare_output_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    fs::path dir;
};

TEST(FormatNumber, ShortestTwelveDigits) {
    EXPECT_EQ(format_number(0.0), "0");
    EXPECT_EQ(format_number(2.5), "2.5");
    EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(format_number(3.162277660168e-7), "3.16227766017e-07");
    EXPECT_EQ(format_number(71.0), "71");
}

RunResult fake_run() {
    RunResult r;
    r.scheme = Scheme::j_ap_fixed;
    r.trace = {1.0, 1.5, 1.75};
    r.trace_violation = {0.0, 0.0, 0.0};
    r.sum_rate = 1.75;
    r.seed = 9;
    r.converged = true;
    r.seconds = 12.0;
    r.events.push_back({1, "licensed", 0, 1.0, 2.0, 0.0, 0.0});
    r.events.push_back({1, "outer", 0, 1.0, 0.0, 0.0, 0.0});
    r.trajectory.q = {{0, 0}, {1.5, -2}};
    return r;
}

TEST_F(OutputFiles, ResultsCsvLayout) {
    const auto r = fake_run();
    write_results_csv(dir / "results.csv", {final_row(r, "none", 0.0, false)});
    EXPECT_EQ(slurp(dir / "results.csv"),
              "scheme,param,value,iter,sum_rate,max_violation,seconds,seed,converged,c1_shortfall\n"
              "j-ap-fixed,none,0,3,1.75,0,0,9,1,0\n");
    write_results_csv(dir / "timed.csv", {final_row(r, "p_max_unlic", 2.2, true)});
    EXPECT_NE(slurp(dir / "timed.csv").find("j-ap-fixed,p_max_unlic,2.2,3,1.75,0,12,9,1,0\n"), std::string::npos);
}

TEST_F(OutputFiles, IterationRowsFlagOnlyTheLast) {
    const auto rows = iteration_rows(fake_run(), "none", 0.0);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].iter, 1);
    EXPECT_FALSE(rows[1].converged);
    EXPECT_TRUE(rows[2].converged);
    EXPECT_EQ(rows[2].sum_rate, 1.75);
}

TEST_F(OutputFiles, IterationDatPadsShortRuns) {
    auto a = fake_run();
    auto b = fake_run();
    b.trace = {3.0};
    write_iteration_dat(dir / "fig.dat", {Scheme::proposed, Scheme::lte_a}, {{&a}, {&b}});
    EXPECT_EQ(slurp(dir / "fig.dat"), "iter proposed lte-a\n1 1 3\n2 1.5 3\n3 1.75 3\n");
}

TEST_F(OutputFiles, SweepAndTrajectoryDat) {
    write_sweep_dat(dir / "s.dat", "p_max_unlic_w", {Scheme::proposed}, {1.98, 2.2}, {{10.0}, {10.5}});
    EXPECT_EQ(slurp(dir / "s.dat"), "p_max_unlic_w proposed\n1.98 10\n2.2 10.5\n");
    write_trajectory_dat(dir / "t.dat", fake_run().trajectory);
    EXPECT_EQ(slurp(dir / "t.dat"), "step x y\n0 0 0\n1 1.5 -2\n");
    write_trace_csv(dir / "trace.csv", fake_run());
    EXPECT_EQ(slurp(dir / "trace.csv"),
              "outer,block,inner,value,bound,kkt,violation\n1,licensed,0,1,2,0,0\n1,outer,0,1,0,0,0\n");
}

TEST_F(OutputFiles, ChannelDumpCoversEveryLink) {
    const auto sc = validate_scenario(testing::base_config(2, 1, 3, 4));
    const auto ch = realize_channels(sc, initial_trajectory(sc), 2);
    write_channels_dat(dir / "c.dat", ch);
    std::ifstream in(dir / "c.dat");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    EXPECT_EQ(lines, 1 + 4 * (2 + 2 + 2 + 1 + 3 + 2));
}

TEST_F(OutputFiles, UnwritablePathThrows) {
    EXPECT_THROW(write_results_csv(dir / "missing" / "r.csv", {}), std::runtime_error);
}

TEST(Manifest, RoundTrip) {
    const auto sc = validate_scenario(testing::base_config(2, 2, 2, 3));
    RunManifest m;
    m.command = "sweep";
    m.scenario_path = "scenarios/x.cfg";
    m.scenario = scenario_to_json(sc);
    m.overrides = {{"max_outer", 7}};
    m.schemes = {"proposed", "lte-a"};
    m.sweep = {{"param", "gamma_unlic"}, {"values", {-40.0, -35.0}}};
    m.seeds = {3, 4};
    m.output_dir = "out";
    m.tool_version = "0.1.0";
    m.timestamp = "2026-01-01T00:00:00Z";
    m.timing = true;
    const auto j = manifest_to_json(m);
    EXPECT_EQ(j["format_version"], kOutputFormatVersion);
    EXPECT_EQ(j["columns"]["results.csv"].size(), result_columns().size());
    const auto back = manifest_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.command, m.command);
    EXPECT_EQ(back.seeds, m.seeds);
    EXPECT_EQ(back.schemes, m.schemes);
    EXPECT_EQ(back.overrides, m.overrides);
    EXPECT_EQ(back.sweep, m.sweep);
    EXPECT_TRUE(back.timing);
    EXPECT_EQ(validate_scenario(back.scenario), sc);
}

TEST(Manifest, RejectsOtherFormatVersions) {
    RunManifest m;
    m.command = "run";
    m.scenario = nlohmann::json::object();
    auto j = manifest_to_json(m);
    j["format_version"] = kOutputFormatVersion + 1;
    EXPECT_THROW(manifest_from_json(j), ConfigError);
}

}  // namespace
}  // namespace airshare
