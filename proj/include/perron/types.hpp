#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace perron {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Time domain of a driving system: Z (maps) or R (flows).
enum class TimeDomain { Discrete, Continuous };

enum class NormKind { MaxNorm, Euclidean };

// A point in the base space of the driving system.
struct BasePoint {
    Vec coords;

    BasePoint() = default;
    explicit BasePoint(Vec c) : coords(std::move(c)) {}
    BasePoint(std::initializer_list<double> xs) : coords(Eigen::Map<const Vec>(xs.begin(), static_cast<Eigen::Index>(xs.size()))) {}

    int dim() const { return static_cast<int>(coords.size()); }
    double operator[](int i) const { return coords[i]; }

    bool same_as(const BasePoint& other) const {
        return coords.size() == other.coords.size() && coords == other.coords;
    }
};

// Scalar random variable on the base space (K, a, b, G, Lip, ...).
using ScalarField = std::function<double(const BasePoint&)>;

inline bool is_integer_time(double t) {
    return std::isfinite(t) && t == std::round(t);
}

inline std::string format_point(const BasePoint& w) {
    std::string s = "(";
    for (int i = 0; i < w.dim(); ++i) {
        if (i) s += ", ";
        s += std::to_string(w.coords[i]);
    }
    return s + ")";
}

} // namespace perron
