#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "airshare/channel.hpp"
#include "airshare/plan.hpp"
#include "support/instances.hpp"

namespace airshare {
namespace {

using testing::base_config;

Scenario no_fading(std::size_t K, std::size_t J, std::size_t M, std::size_t N) {
    auto doc = base_config(K, J, M, N);
    doc["fading"] = "none";
    return validate_scenario(doc);
}

TEST(Channel, GainDirectlyAboveSu) {
    auto doc = base_config(1, 1, 1, 1);
    doc["fading"] = "none";
    doc["uav_height_m"] = 100.0;
    doc["beta0"] = 1e-3;
    doc["path_loss_exp"] = 2.2;
    const auto sc = validate_scenario(doc);
    const auto ch = realize_channels(sc, Trajectory{{sc.su_pos[0]}}, 1);
    EXPECT_NEAR(ch.h_us(0, 0), 1e-3 * std::pow(100.0, -2.2), 1e-20);
}

TEST(Channel, GainFollowsThreeDimensionalDistance) {
    const auto sc = no_fading(1, 1, 1, 1);
    const Vec2 q = sc.su_pos[0] + Vec2{30.0, 40.0};
    const auto ch = realize_channels(sc, Trajectory{{q}}, 1);
    const double d = std::sqrt(50.0 * 50.0 + 50.0 * 50.0);  // 50 m off, 50 m up
    EXPECT_NEAR(ch.h_us(0, 0) / (1e-3 * std::pow(d, -2.2)), 1.0, 1e-12);
}

TEST(Channel, SameSeedIsBitIdentical) {
    const auto sc = validate_scenario(base_config(3, 2, 2, 6));
    const auto t = initial_trajectory(sc);
    const auto a = realize_channels(sc, t, 42);
    const auto b = realize_channels(sc, t, 42);
    EXPECT_TRUE(a == b);
    const auto c = realize_channels(sc, t, 43);
    EXPECT_FALSE(a.fading == c.fading);
}

TEST(Channel, FadingHasUnitMean) {
    const auto sc = validate_scenario(base_config(4, 4, 4, 500));
    const auto f = draw_fading(sc, 9);
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto* g : {&f.us, &f.ps, &f.ws, &f.up, &f.uw}) {
        for (double v : g->flat()) {
            EXPECT_GE(v, 0.0);
            acc += v;
            ++count;
        }
    }
    EXPECT_NEAR(acc / static_cast<double>(count), 1.0, 0.03);
}

TEST(Channel, RebindKeepsFadingAndGroundLinks) {
    const auto sc = validate_scenario(base_config(2, 2, 2, 3));
    const auto t0 = initial_trajectory(sc);
    auto t1 = t0;
    for (auto& q : t1.q) q = q + Vec2{5.0, -3.0};
    const auto ch0 = realize_channels(sc, t0, 5);
    const auto moved = rebind(ch0, sc, t1);
    EXPECT_TRUE(moved == realize_channels(sc, t1, 5));
    EXPECT_TRUE(moved.h_ps == ch0.h_ps);
    EXPECT_FALSE(moved.h_us == ch0.h_us);
}

TEST(Channel, TrajectoryLengthMismatchThrows) {
    const auto sc = validate_scenario(base_config(2, 2, 2, 3));
    EXPECT_THROW(realize_channels(sc, Trajectory{std::vector<Vec2>(2)}, 1), std::invalid_argument);
}

class Sinr : public ::testing::Test {
protected:
    Scenario sc = no_fading(2, 2, 2, 1);
    ChannelRealization ch = realize_channels(sc, initial_trajectory(sc), 3);
};

TEST_F(Sinr, ZeroPowerGivesZero) {
    EXPECT_EQ(sinr_licensed(0.0, 0, 0, 0, ch, sc), 0.0);
    EXPECT_EQ(sinr_unlicensed(0.0, 1, 1, 0, ch, sc), 0.0);
}

TEST_F(Sinr, ConstructedUnitRatio) {
    const double sigma2 = sc.noise_power_w[0];
    ch.jam_power_w(0, 0) = 0.0;
    ch.h_ps(0, 0) = sigma2 / sc.pbs_power_w[0];
    ch.h_ws(0, 0) = sigma2 / sc.wifi_power_w[0];
    const double p = 0.5;
    ch.h_us(0, 0) = 2.0 * sigma2 / p;
    EXPECT_NEAR(sinr_licensed(p, 0, 0, 0, ch, sc), 1.0, 1e-12);
    EXPECT_NEAR(sinr_unlicensed(p, 0, 0, 0, ch, sc), 1.0, 1e-12);
}

TEST(SinrOracle, MatchesDirectEvaluation) {
    RandomStream rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto sc = testing::random_instance(rng, 3, 2, 2, 4);
        Trajectory t = initial_trajectory(sc);
        for (auto& q : t.q) q = q + Vec2{rng.uniform(-20, 20), rng.uniform(-20, 20)};
        const auto ch = realize_channels(sc, t, sc.rng_seed);
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t n = 0; n < 4; ++n) {
                const double p = rng.uniform(0.0, 1.0);
                const Vec2 dq = t.q[n] - sc.su_pos[k];
                const double d2 = dq.x * dq.x + dq.y * dq.y + sc.uav_height_m * sc.uav_height_m;
                const double hus = sc.beta0 * ch.fading.us(k, n) * std::pow(std::sqrt(d2), -sc.path_loss_exp);
                const double dps = std::hypot(sc.pbs_pos.x - sc.su_pos[k].x, sc.pbs_pos.y - sc.su_pos[k].y);
                const double hps = sc.beta0 * ch.fading.ps(k, n) * std::pow(dps, -sc.ground_path_loss_exp);
                const double dws = std::hypot(sc.wifi_ap_pos.x - sc.su_pos[k].x, sc.wifi_ap_pos.y - sc.su_pos[k].y);
                const double hws = sc.beta0 * ch.fading.ws(k, n) * std::pow(dws, -sc.ground_path_loss_exp);
                for (std::size_t j = 0; j < 2; ++j) {
                    const double want =
                        hus * p / (hps * sc.pbs_power_w[j] + sc.jammer_beam_power_w(k, n) + sc.noise_power_w[k]);
                    EXPECT_NEAR(sinr_licensed(p, k, j, n, ch, sc), want, 1e-12 * want);
                }
                for (std::size_t m = 0; m < 2; ++m) {
                    const double want =
                        hus * p / (hws * sc.wifi_power_w[m] + sc.jammer_beam_power_w(k, n) + sc.noise_power_w[k]);
                    EXPECT_NEAR(sinr_unlicensed(p, k, m, n, ch, sc), want, 1e-12 * want);
                }
            }
        }
    }
}

TEST(SinrScale, CommonFactorCancels) {
    auto sc = no_fading(1, 1, 1, 1);
    auto ch = realize_channels(sc, initial_trajectory(sc), 1);
    ch.jam_power_w(0, 0) = 1e-11;
    const double before = sinr_licensed(0.3, 0, 0, 0, ch, sc);
    const double s = 7.5;
    ch.h_us(0, 0) *= s;
    ch.h_ps(0, 0) *= s;
    ch.jam_power_w(0, 0) *= s;
    sc.noise_power_w[0] *= s;
    EXPECT_NEAR(sinr_licensed(0.3, 0, 0, 0, ch, sc), before, 1e-12 * before);
}

TEST(SinrMonotone, IncreasingInPowerDecreasingInJamming) {
    const auto sc = no_fading(1, 1, 1, 1);
    auto ch = realize_channels(sc, initial_trajectory(sc), 1);
    double prev = -1.0;
    for (double p : {0.0, 1e-3, 0.1, 0.5, 1.0}) {
        const double s = sinr_unlicensed(p, 0, 0, 0, ch, sc);
        EXPECT_GT(s, prev);
        prev = s;
    }
    prev = std::numeric_limits<double>::infinity();
    for (double jam : {0.0, 1e-12, 1e-10, 1e-8}) {
        ch.jam_power_w(0, 0) = jam;
        const double s = sinr_licensed(0.5, 0, 0, 0, ch, sc);
        EXPECT_LT(s, prev);
        prev = s;
    }
}

TEST(RateTerm, Values) {
    EXPECT_EQ(rate_term(0, 123.0), 0.0);
    EXPECT_DOUBLE_EQ(rate_term(1, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(rate_term(1, 3.0), 2.0);
    EXPECT_THROW(rate_term(1, -0.5), std::invalid_argument);
    EXPECT_THROW(rate_term(2, 1.0), std::invalid_argument);
}

TEST(SumRate, ZeroPlanIsZero) {
    const auto sc = validate_scenario(base_config(2, 2, 2, 3));
    const auto ch = realize_channels(sc, initial_trajectory(sc), 1);
    EXPECT_EQ(sum_rate(AllocationPlan::empty(sc), ch, sc), 0.0);
}

TEST(SumRate, SingleChannelAtUnitSinr) {
    const auto sc = no_fading(1, 1, 1, 1);
    auto ch = realize_channels(sc, initial_trajectory(sc), 1);
    auto plan = AllocationPlan::empty(sc);
    plan.rho_lic(0, 0, 0) = 1;
    plan.p_lic(0, 0, 0) = 0.2;
    ch.h_us(0, 0) = licensed_floor(0, 0, 0, ch, sc) / 0.2;
    EXPECT_NEAR(sum_rate(plan, ch, sc), 1.0, 1e-12);
}

TEST(SumRate, MatchesTermByTermOracle) {
    RandomStream rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto sc = testing::random_instance(rng, 3, 2, 3, 5);
        const auto ch = realize_channels(sc, initial_trajectory(sc), sc.rng_seed);
        auto plan = AllocationPlan::empty(sc);
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t n = 0; n < 5; ++n) {
                for (std::size_t j = 0; j < 2; ++j) {
                    plan.rho_lic(k, j, n) = rng.uniform() < 0.4;
                    plan.p_lic(k, j, n) = plan.rho_lic(k, j, n) ? rng.uniform(0.0, 0.5) : 0.0;
                }
                for (std::size_t m = 0; m < 3; ++m) {
                    plan.rho_unlic(k, m, n) = rng.uniform() < 0.4;
                    plan.p_unlic(k, m, n) = plan.rho_unlic(k, m, n) ? rng.uniform(0.0, 0.5) : 0.0;
                }
            }
        }
        double oracle = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t n = 0; n < 5; ++n) {
                for (std::size_t j = 0; j < 2; ++j) {
                    if (!plan.rho_lic(k, j, n)) continue;
                    const double den = ch.h_ps(k, n) * sc.pbs_power_w[j] + ch.jam_power_w(k, n) + sc.noise_power_w[k];
                    oracle += std::log2(1.0 + ch.h_us(k, n) * plan.p_lic(k, j, n) / den);
                }
                for (std::size_t m = 0; m < 3; ++m) {
                    if (!plan.rho_unlic(k, m, n)) continue;
                    const double den = ch.h_ws(k, n) * sc.wifi_power_w[m] + ch.jam_power_w(k, n) + sc.noise_power_w[k];
                    oracle += std::log2(1.0 + ch.h_us(k, n) * plan.p_unlic(k, m, n) / den);
                }
            }
        }
        oracle /= 5.0;
        EXPECT_NEAR(sum_rate(plan, ch, sc), oracle, 1e-12 * std::max(1.0, oracle));
    }
}

TEST(Constraints, ReportFlagsEachFamily) {
    const auto sc = no_fading(2, 1, 1, 2);
    const auto t = initial_trajectory(sc);
    const auto ch = realize_channels(sc, t, 1);
    auto plan = AllocationPlan::empty(sc);
    EXPECT_EQ(check_constraints(plan, t, ch, sc).max_violation(), 0.0);

    plan.rho_lic(0, 0, 0) = plan.rho_lic(1, 0, 0) = 1;
    EXPECT_GE(check_constraints(plan, t, ch, sc).c4c5c6, 1.0);
    plan = AllocationPlan::empty(sc);
    plan.rho_unlic(0, 0, 1) = 1;
    plan.p_unlic(0, 0, 1) = 2.0 * sc.p_max_unlic_w;
    EXPECT_NEAR(check_constraints(plan, t, ch, sc).c10, 1.0, 1e-12);
    plan.rho_unlic(0, 0, 1) = 0;
    EXPECT_EQ(check_constraints(plan, t, ch, sc).power_without_rho, 1.0);
}

}  // namespace
}  // namespace airshare
