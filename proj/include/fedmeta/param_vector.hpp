#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "fedmeta/error.hpp"

namespace fedmeta {

/// Flat vector of every weight and bias of a model. This is the unit that
/// agents and the parameter server exchange.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t size, double fill = 0.0) : values_(size, fill) {}
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
    ParamVector(std::initializer_list<double> values) : values_(values) {}

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    std::span<double> span() noexcept { return values_; }
    std::span<const double> span() const noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    auto begin() noexcept { return values_.begin(); }
    auto end() noexcept { return values_.end(); }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

    bool all_finite() const noexcept {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    ParamVector& operator+=(const ParamVector& rhs) {
        check_same_size(rhs);
        for (std::size_t i = 0; i < size(); ++i) values_[i] += rhs.values_[i];
        return *this;
    }
    ParamVector& operator-=(const ParamVector& rhs) {
        check_same_size(rhs);
        for (std::size_t i = 0; i < size(); ++i) values_[i] -= rhs.values_[i];
        return *this;
    }
    ParamVector& operator*=(double s) noexcept {
        for (double& v : values_) v *= s;
        return *this;
    }

    /// this += s * x
    ParamVector& axpy(double s, const ParamVector& x) {
        check_same_size(x);
        for (std::size_t i = 0; i < size(); ++i) values_[i] += s * x.values_[i];
        return *this;
    }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    void check_same_size(const ParamVector& other) const {
        require(other.size() == size(), errc::dimension_mismatch,
                "parameter vectors of length " + std::to_string(size()) + " and " +
                    std::to_string(other.size()));
    }

    std::vector<double> values_;
};

inline ParamVector operator+(ParamVector lhs, const ParamVector& rhs) { return lhs += rhs; }
inline ParamVector operator-(ParamVector lhs, const ParamVector& rhs) { return lhs -= rhs; }
inline ParamVector operator*(double s, ParamVector v) { return v *= s; }

inline double dot(const ParamVector& a, const ParamVector& b) {
    require(a.size() == b.size(), errc::dimension_mismatch, "dot of mismatched vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm_sq(const ParamVector& a) { return dot(a, a); }
inline double norm(const ParamVector& a) { return std::sqrt(norm_sq(a)); }

inline double distance_sq(const ParamVector& a, const ParamVector& b) {
    require(a.size() == b.size(), errc::dimension_mismatch, "distance of mismatched vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

/// Arithmetic mean, summed in the order given.
inline ParamVector mean(std::span<const ParamVector> vectors) {
    require(!vectors.empty(), errc::empty_input, "mean of zero vectors");
    ParamVector acc(vectors.front().size());
    for (const auto& v : vectors) acc += v;
    acc *= 1.0 / static_cast<double>(vectors.size());
    return acc;
}

} // namespace fedmeta
