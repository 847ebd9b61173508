#pragma once

// Euclidean projection onto the ball {x : |x - center|^2 <= radius_sq},
// solved through its KKT system:
//
//   (x - p) + 2 mu (x - center) = 0
//   mu (|x - center|^2 - radius_sq) = 0,   mu >= 0
//
// Stationarity gives x = (p + 2 mu center) / (1 + 2 mu). When the constraint
// is active, substituting into |x - center|^2 = radius_sq leaves
//
//   mu^2 + mu - c / (4 radius_sq) + 1/4 = 0,   c = |p - center|^2,
//
// whose non-negative root is mu = (sqrt(c / radius_sq) - 1) / 2.

#include <cmath>

#include "fedmeta/error.hpp"
#include "fedmeta/param_vector.hpp"

namespace fedmeta {

struct BallConstraint {
    ParamVector center;
    double radius_sq = 1.0;
};

struct ProjectionResult {
    ParamVector point;
    double multiplier = 0.0;
    bool active = false;
};

/// Points with c <= radius_sq * (1 + inside_tolerance) count as feasible.
inline constexpr double inside_tolerance = 1e-12;

/// Non-negative root of the multiplier quadratic for a point at squared
/// distance `dist_sq` from the center.
inline double solve_mu(double dist_sq, double radius_sq) {
    require(radius_sq > 0.0 && std::isfinite(radius_sq), errc::non_positive_radius,
            "ball radius must be positive and finite");
    require(dist_sq >= 0.0, errc::invalid_argument, "squared distance must be non-negative");
    if (dist_sq <= radius_sq) return 0.0;
    return 0.5 * (std::sqrt(dist_sq / radius_sq) - 1.0);
}

/// Residual of the raw quadratic at `mu`; used to audit solve_mu().
inline double mu_quadratic_residual(double mu, double dist_sq, double radius_sq) {
    return mu * mu + mu - dist_sq / (4.0 * radius_sq) + 0.25;
}

inline ProjectionResult project(const ParamVector& point, const BallConstraint& ball) {
    require(point.size() == ball.center.size(), errc::dimension_mismatch,
            "point has " + std::to_string(point.size()) + " entries, ball center " +
                std::to_string(ball.center.size()));
    require(ball.radius_sq > 0.0 && std::isfinite(ball.radius_sq), errc::non_positive_radius,
            "ball radius must be positive and finite");

    const double c = distance_sq(point, ball.center);
    if (c <= ball.radius_sq * (1.0 + inside_tolerance)) return {point, 0.0, false};

    const double mu = solve_mu(c, ball.radius_sq);
    const double scale = 1.0 / (1.0 + 2.0 * mu);
    ParamVector x(point.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (point[i] + 2.0 * mu * ball.center[i]) * scale;
    return {std::move(x), mu, true};
}

} // namespace fedmeta
