#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fedmeta/projection.hpp"
#include "fedmeta/random.hpp"

using namespace fedmeta;

namespace {

// Radial projection written independently of the multiplier route.
ParamVector radial_projection(const ParamVector& p, const ParamVector& center, double radius_sq) {
    double c = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) c += (p[i] - center[i]) * (p[i] - center[i]);
    const double shrink = c > 0.0 ? std::min(1.0, std::sqrt(radius_sq / c)) : 1.0;
    ParamVector out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = center[i] + (p[i] - center[i]) * shrink;
    return out;
}

ParamVector random_vector(std::size_t d, Rng& rng, double scale) {
    std::normal_distribution<double> dist(0.0, scale);
    ParamVector v(d);
    for (auto& x : v) x = dist(rng);
    return v;
}

} // namespace

TEST(SolveMu, BoundaryGivesZero) { EXPECT_EQ(solve_mu(2.5, 2.5), 0.0); }

TEST(SolveMu, HandSolvedQuadratic) {
    // mu^2 + mu - 25/4 + 1/4 = mu^2 + mu - 6 = (mu + 3)(mu - 2)
    EXPECT_DOUBLE_EQ(solve_mu(25.0, 1.0), 2.0);
    EXPECT_DOUBLE_EQ(mu_quadratic_residual(2.0, 25.0, 1.0), 0.0);
    const double raw_root = (-1.0 + std::sqrt(1.0 + 4.0 * 6.0)) / 2.0;
    EXPECT_DOUBLE_EQ(raw_root, solve_mu(25.0, 1.0));
}

TEST(SolveMu, FourTimesRadius) {
    EXPECT_DOUBLE_EQ(solve_mu(4.0 * 0.3, 0.3), 0.5);
}

TEST(SolveMu, RejectsNonPositiveRadius) {
    for (double r : {0.0, -1.0}) {
        try {
            solve_mu(1.0, r);
            FAIL();
        } catch (const error& e) {
            EXPECT_EQ(e.code(), errc::non_positive_radius);
        }
    }
}

TEST(SolveMu, QuadraticResidualProperty) {
    Rng rng(8);
    std::uniform_real_distribution<double> log_ratio(0.0, 12.0);
    std::uniform_real_distribution<double> log_radius(-8.0, 4.0);
    for (int i = 0; i < 10000; ++i) {
        const double radius_sq = std::pow(10.0, log_radius(rng));
        const double c = radius_sq * std::pow(10.0, log_ratio(rng));
        const double mu = solve_mu(c, radius_sq);
        EXPECT_LE(std::abs(mu_quadratic_residual(mu, c, radius_sq)), 1e-10 * std::max(1.0, c / radius_sq));
    }
}

TEST(Project, InsideIsIdentity) {
    const ParamVector p{0.1, -0.2};
    const auto r = project(p, {ParamVector{0.0, 0.0}, 1.0});
    EXPECT_EQ(r.point, p);
    EXPECT_EQ(r.multiplier, 0.0);
    EXPECT_FALSE(r.active);
}

TEST(Project, ThreeFourFiveTriangle) {
    const auto r = project(ParamVector{3.0, 4.0}, {ParamVector{0.0, 0.0}, 1.0});
    EXPECT_TRUE(r.active);
    EXPECT_DOUBLE_EQ(r.multiplier, 2.0);
    EXPECT_NEAR(r.point[0], 0.6, 1e-15);
    EXPECT_NEAR(r.point[1], 0.8, 1e-15);
    // stationarity: (x - p) + 2 mu (x - center) = 0
    EXPECT_NEAR((r.point[0] - 3.0) + 4.0 * r.point[0], 0.0, 1e-14);
    EXPECT_NEAR((r.point[1] - 4.0) + 4.0 * r.point[1], 0.0, 1e-14);
}

TEST(Project, BoundaryPointUnchanged) {
    const ParamVector center{1.0, 1.0};
    const ParamVector p{4.0, 5.0}; // distance^2 = 25
    const auto r = project(p, {center, 25.0});
    EXPECT_EQ(r.point, p);
    EXPECT_EQ(r.multiplier, 0.0);
}

TEST(Project, DimensionMismatch) {
    try {
        project(ParamVector{1.0}, {ParamVector{0.0, 0.0}, 1.0});
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::dimension_mismatch);
    }
}

TEST(Project, KktAndOracleProperties) {
    Rng rng(2024);
    std::uniform_int_distribution<std::size_t> dims(1, 100);
    std::uniform_real_distribution<double> log_radius(-6.0, 2.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t d = dims(rng);
        const auto center = random_vector(d, rng, 3.0);
        const auto p = random_vector(d, rng, 3.0);
        const double radius_sq = std::pow(10.0, log_radius(rng));
        const auto r = project(p, {center, radius_sq});

        const auto oracle = radial_projection(p, center, radius_sq);
        for (std::size_t i = 0; i < d; ++i) ASSERT_NEAR(r.point[i], oracle[i], 1e-10);

        ParamVector stationarity = r.point - p;
        stationarity.axpy(2.0 * r.multiplier, r.point - center);
        EXPECT_LE(norm(stationarity), 1e-8 * (1.0 + norm(p)));
        const double gap = distance_sq(r.point, center) - radius_sq;
        EXPECT_LE(std::abs(r.multiplier * gap), 1e-8);
        EXPECT_GE(r.multiplier, 0.0);
        EXPECT_EQ(r.active, r.multiplier > 0.0);
        EXPECT_LE(gap, 1e-9 * radius_sq);

        const auto twice = project(r.point, {center, radius_sq});
        for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(twice.point[i], r.point[i], 1e-12);
    }
}

TEST(Project, NonExpansive) {
    Rng rng(77);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t d = 1 + trial % 20;
        const auto center = random_vector(d, rng, 1.0);
        const auto x = random_vector(d, rng, 2.0);
        const auto y = random_vector(d, rng, 2.0);
        const BallConstraint ball{center, 0.5};
        EXPECT_LE(std::sqrt(distance_sq(project(x, ball).point, project(y, ball).point)),
                  std::sqrt(distance_sq(x, y)) + 1e-12);
    }
}
