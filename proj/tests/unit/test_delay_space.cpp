#include "doat/delay_space.hpp"
#include "doat/error.hpp"
#include "doat/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

using namespace doat;

TEST(DelayPoint, RejectsNonFiniteCoordinates) {
    EXPECT_THROW(DelayPoint({1.0, std::nan("")}), Error);
    EXPECT_THROW(DelayPoint({INFINITY, 0.0}), Error);
    EXPECT_NO_THROW(DelayPoint({-100.0, 100.0}));
}

TEST(Delay, EuclideanDistance) {
    EXPECT_DOUBLE_EQ(delay(DelayPoint{0, 0}, DelayPoint{3, 4}), 5.0);
    EXPECT_DOUBLE_EQ(delay(DelayPoint{1, 1, 1}, DelayPoint{1, 1, 1}), 0.0);
    EXPECT_THROW(delay(DelayPoint{0, 0}, DelayPoint{0, 0, 0}), DimensionError);
}

TEST(Delay, MetricProperties) {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        DelayPoint a{rng.uniform(-100, 100), rng.uniform(-100, 100)};
        DelayPoint b{rng.uniform(-100, 100), rng.uniform(-100, 100)};
        DelayPoint c{rng.uniform(-100, 100), rng.uniform(-100, 100)};
        EXPECT_GE(delay(a, b), 0.0);
        EXPECT_DOUBLE_EQ(delay(a, b), delay(b, a));
        EXPECT_LE(delay(a, c), delay(a, b) + delay(b, c) + 1e-9);
    }
}

TEST(GenerateUniform, CountBoundsAndDeterminism) {
    const auto box = BoundingBox::cube(2, -100, 100);
    const auto a = generate_uniform(500, box, 1);
    const auto b = generate_uniform(500, box, 1);
    const auto c = generate_uniform(500, box, 2);
    ASSERT_EQ(a.size(), 500u);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (const auto& p : a) {
        ASSERT_EQ(p.dim(), 2u);
        for (double x : p.coords()) {
            EXPECT_GE(x, -100.0);
            EXPECT_LT(x, 100.0);
        }
    }
    EXPECT_THROW(generate_uniform(0, box, 1), Error);
}

TEST(AveragePairwiseDelay, SmallCases) {
    EXPECT_DOUBLE_EQ(average_pairwise_delay(std::vector<DelayPoint>{{0, 0}, {3, 4}}), 5.0);
    // Equilateral-free check: three collinear points 0, 1, 3 -> (1 + 3 + 2) / 3.
    EXPECT_DOUBLE_EQ(average_pairwise_delay(std::vector<DelayPoint>{{0, 0}, {1, 0}, {3, 0}}), 2.0);
    EXPECT_THROW(average_pairwise_delay(std::vector<DelayPoint>{{0, 0}}), Error);
}

TEST(AveragePairwiseDelay, MatchesMonteCarloAndAnalyticMean) {
    // The mean distance between two uniform points in a square of side s is
    // s * (2 + sqrt(2) + 5 asinh(1)) / 15 ~= 0.521405 s.
    const double analytic = 200.0 * (2.0 + std::sqrt(2.0) + 5.0 * std::asinh(1.0)) / 15.0;
    const auto pts = generate_uniform(3000, BoundingBox::cube(2, -100, 100), 11);
    const double D = average_pairwise_delay(pts);
    EXPECT_NEAR(D, analytic, 2.0);

    // Independent estimate: random pairs drawn with the standard library.
    std::mt19937 gen(7);
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    double sum = 0.0;
    const int samples = 200000;
    for (int i = 0; i < samples; ++i) {
        const auto a = pick(gen);
        auto b = pick(gen);
        while (b == a) {
            b = pick(gen);
        }
        sum += std::hypot(pts[a][0] - pts[b][0], pts[a][1] - pts[b][1]);
    }
    EXPECT_NEAR(D, sum / samples, 0.6);
}

TEST(CoordinateFile, RoundTripIsExact) {
    const auto pts = generate_uniform(50, BoundingBox::cube(3, -10, 10), 3);
    std::stringstream ss;
    write_coordinates(ss, pts);
    EXPECT_EQ(parse_coordinates(ss), pts);
}

TEST(CoordinateFile, CommentsAndBlankLines) {
    std::istringstream in("# header\n\n0 1.5 2\n1 -3 4 # trailing\n");
    const auto pts = parse_coordinates(in);
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_EQ(pts[1], (DelayPoint{-3, 4}));
}

TEST(CoordinateFile, Errors) {
    {
        std::istringstream in("0 1 2\n1 1\n");
        EXPECT_THROW(parse_coordinates(in), DimensionError);
    }
    {
        std::istringstream in("0 1 2\n0 3 4\n");
        EXPECT_THROW(parse_coordinates(in), ParseError);
    }
    {
        std::istringstream in("0 1 2\n1 x 4\n");
        try {
            parse_coordinates(in);
            FAIL() << "expected ParseError";
        } catch (const ParseError& e) {
            EXPECT_EQ(e.line(), 2u);
        }
    }
    EXPECT_THROW(load_coordinates("/nonexistent/coords.txt"), Error);
}

TEST(BoundingBox, Validation) {
    EXPECT_THROW((BoundingBox{{0, 0}, {1, 0}}.validate()), DimensionError);
    EXPECT_THROW((BoundingBox{{0}, {1, 1}}.validate()), DimensionError);
    EXPECT_NO_THROW(BoundingBox::cube(4, -1, 1).validate());
}
