#include "doat/error.hpp"
#include "doat/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace doat;

namespace {

Scenario small(std::size_t n, double density, std::uint64_t seed = 1) {
    Scenario s;
    s.id = "t";
    s.dataset.n = n;
    s.density = density;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(Oracle, MatchesIndependentScan) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-100, 100);
    std::vector<DelayPoint> pos;
    for (int i = 0; i < 200; ++i) {
        pos.push_back(DelayPoint{u(gen), u(gen)});
    }
    std::vector<Member> members;
    for (std::uint32_t i = 0; i < 200; i += 9) {
        members.push_back(Member{members.size(), i % 2 ? "a" : "b", i, 0.0});
    }
    for (std::uint32_t o = 0; o < 200; ++o) {
        for (const std::string g : {"a", "b"}) {
            double best = INFINITY;
            for (const auto& m : members) {
                if (m.group == g) {
                    best = std::min(best, std::hypot(pos[o][0] - pos[m.node][0], pos[o][1] - pos[m.node][1]));
                }
            }
            EXPECT_NEAR(oracle_closest_member(pos[o], g, members, pos).second, best, 1e-12);
        }
    }
    EXPECT_THROW(oracle_closest_member(pos[0], "none", members, pos), Error);
}

TEST(Oracle, TiesGoToLowestMemberId) {
    const std::vector<DelayPoint> pos{{0, 0}, {1, 0}, {-1, 0}};
    const std::vector<Member> members{{5, "g", 1, 0.0}, {2, "g", 2, 0.0}};
    EXPECT_EQ(oracle_closest_member(pos[0], "g", members, pos).first->id, 2u);
}

TEST(AccuracyError, WorkedExamples) {
    EXPECT_NEAR(accuracy_error(120.0, 100.0, 104.0), 20.0 / 104.0, 1e-15);
    EXPECT_NEAR(accuracy_error(120.0, 100.0, 104.0), 0.19230769230769232, 1e-15);
    EXPECT_DOUBLE_EQ(accuracy_error(50.0, 50.0, 104.0), 0.0);
    EXPECT_THROW(accuracy_error(1, 0, 0), Error);
}

TEST(Scenario, ValidationAndMemberCounts) {
    Scenario s;
    EXPECT_NO_THROW(s.validate());
    s.density = 0.0;
    EXPECT_THROW(s.validate(), ConfigError);
    s.density = 1.5;
    EXPECT_THROW(s.validate(), ConfigError);
    s.density = 0.01;
    EXPECT_EQ(s.members_per_group(500), 5u);
    EXPECT_EQ(s.members_per_group(2), 1u);
    EXPECT_EQ(s.members_per_group(3000), 30u);
    s.dataset.n = 1;
    EXPECT_THROW(s.validate(), ConfigError);
    EXPECT_THROW(parse_mode("sometimes"), ConfigError);
    EXPECT_EQ(parse_mode(to_string(Mode::asynchronous)), Mode::asynchronous);
}

TEST(Synchronous, TwoNodesOneMember) {
    const auto m = run_synchronous(small(2, 0.5));
    EXPECT_EQ(m.members, 1u);
    ASSERT_EQ(m.queries.size(), 2u);
    for (const auto& q : m.queries) {
        EXPECT_TRUE(q.success);
        EXPECT_DOUBLE_EQ(q.error, 0.0);
        EXPECT_DOUBLE_EQ(q.R, q.C);
    }
}

TEST(Synchronous, MetricsAreConsistent) {
    const auto s = small(300, 0.05, 4);
    const auto m = run_synchronous(s);
    EXPECT_EQ(m.n_nodes, 300u);
    EXPECT_EQ(m.members, 15u);
    EXPECT_EQ(m.queries.size(), 300u);
    EXPECT_NEAR(m.D, 104.3, 4.0);
    for (const auto& q : m.queries) {
        ASSERT_TRUE(q.success);
        EXPECT_GE(q.R, q.C - 1e-12);
        EXPECT_NEAR(q.error, (q.R - q.C) / m.D, 1e-12);
        if (q.hops == 0) {
            EXPECT_DOUBLE_EQ(q.R, 0.0);  // the origin hosts a member itself
        }
    }
    const auto sum = summarize(m);
    EXPECT_DOUBLE_EQ(sum.success_rate, 1.0);
    EXPECT_GT(m.overhead, 0.0);
    EXPECT_EQ(m.metadata.at("curve"), "moore");
    EXPECT_EQ(m.metadata.at("rng"), Rng::kAlgorithm);
    EXPECT_EQ(m.metadata.at("hop_order_violations"), "0");
}

TEST(Synchronous, Deterministic) {
    const auto s = small(200, 0.1, 7);
    EXPECT_EQ(run_synchronous(s), run_synchronous(s));
    auto other = s;
    other.seed = 8;
    EXPECT_NE(run_synchronous(s).queries, run_synchronous(other).queries);
}

TEST(Synchronous, PreparedOverlayIsReusable) {
    const auto s = small(150, 0.1, 9);
    const auto prep = prepare_overlay(s);
    EXPECT_EQ(run_synchronous(s, prep), run_synchronous(s, prep));
    EXPECT_EQ(run_synchronous(s, prep), run_synchronous(s));
    auto other = s;
    other.seed = 10;
    EXPECT_THROW(run_synchronous(other, prep), ConfigError);
}

TEST(Synchronous, NoFalsePositivesMeansFullSuccess) {
    auto s = small(200, 0.05, 11);
    s.groups = 3;
    s.track_exact_sets = true;
    const auto m = run_synchronous(s);
    EXPECT_EQ(m.metadata.at("false_positive_entries"), "0");
    EXPECT_DOUBLE_EQ(summarize(m).success_rate, 1.0);
    EXPECT_EQ(m.queries.size(), 600u);
}

TEST(Asynchronous, CountsOnlyArrivedMembersAndThrottlingSavesUpdates) {
    auto s = small(200, 0.05, 12);
    s.mode = Mode::asynchronous;
    const auto prep = prepare_overlay(s);
    const auto eager = run_asynchronous(s, prep);
    // 10 arrivals, 20 origins per round, each round queries the one group.
    EXPECT_EQ(eager.queries.size(), 10u * 20u);
    for (const auto& q : eager.queries) {
        EXPECT_TRUE(q.success);
        EXPECT_GE(q.R, q.C - 1e-12);
    }
    s.update_interval = 4.0;
    const auto lazy = run_asynchronous(s, prep);
    EXPECT_LT(lazy.route_updates, eager.route_updates);
    EXPECT_LT(lazy.overhead, eager.overhead);
}

TEST(Perturb, LawAndCommonRandomNumbers) {
    std::vector<DelayPoint> base(3000, DelayPoint{10, -20});
    const auto a = perturb(base, 10.0, 5);
    const auto b = perturb(base, 20.0, 5);
    double mean = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double dx = a[i][0] - 10;
        const double dy = a[i][1] + 20;
        const double len = std::hypot(dx, dy);
        ASSERT_GE(len, 5.0 - 1e-9);
        ASSERT_LE(len, 15.0 + 1e-9);
        mean += len;
        sx += dx / len;
        sy += dy / len;
        // Same seed: same direction, twice the length.
        EXPECT_NEAR(b[i][0] - 10, 2 * dx, 1e-9);
        EXPECT_NEAR(b[i][1] + 20, 2 * dy, 1e-9);
    }
    mean /= double(base.size());
    EXPECT_NEAR(mean, 10.0, 0.5);
    // Directions are spread around the circle.
    EXPECT_LT(std::hypot(sx, sy) / double(base.size()), 0.05);
    EXPECT_THROW(perturb(std::vector<DelayPoint>{DelayPoint{1, 2, 3}}, 1.0, 1), DimensionError);
}

TEST(OffsetSweep, ZeroOffsetEqualsBaselineAndErrorGrows) {
    auto s = small(300, 0.05, 13);
    const auto prep = prepare_overlay(s);
    const auto base = run_synchronous(s, prep);
    s.offsets = {0.0, 40.0};
    const auto sweep = run_offset_sweep(s, prep);
    ASSERT_EQ(sweep.queries.size(), 600u);
    const auto s0 = summarize(sweep, 0.0);
    const auto b0 = summarize(base);
    EXPECT_DOUBLE_EQ(s0.mean_error, b0.mean_error);
    EXPECT_DOUBLE_EQ(s0.mean_query_time, b0.mean_query_time);
    EXPECT_GT(summarize(sweep, 40.0).mean_error, s0.mean_error);
    EXPECT_TRUE(sweep.metadata.count("average_delay_ms@40"));
}

TEST(Summary, HandlesFailuresAndOffsets) {
    RunMetrics m;
    m.queries.push_back(QueryMetric{0, "g", 0.0, 2, 10.0, 5, 5, 0.0, true});
    m.queries.push_back(QueryMetric{1, "g", 0.0, 0, 0.0, NAN, 1, NAN, false});
    m.queries.push_back(QueryMetric{2, "g", 5.0, 4, 40.0, 7, 5, 0.5, true});
    const auto all = summarize(m);
    EXPECT_EQ(all.queries, 3u);
    EXPECT_NEAR(all.success_rate, 2.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(all.mean_error, 0.25);
    EXPECT_DOUBLE_EQ(all.mean_hops, 3.0);
    EXPECT_DOUBLE_EQ(all.mean_hop_delay, 7.5);
    const auto at5 = summarize(m, 5.0);
    EXPECT_EQ(at5.queries, 1u);
    EXPECT_DOUBLE_EQ(at5.mean_query_time, 40.0);
}
