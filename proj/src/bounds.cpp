#include "perron/bounds.hpp"

#include "perron/cocycle.hpp"

#include <cmath>

namespace perron {

namespace {

double checked(double v, const char* which, double t, const BasePoint& w) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw std::domain_error(std::string(which) + " is not strictly positive at t=" +
                                std::to_string(t) + ", w=" + format_point(w));
    return v;
}

double checked_K(const ScalarField& K, const BasePoint& w) {
    double k = K(w);
    if (!(k >= 1.0 - 1e-12) || !std::isfinite(k))
        throw std::domain_error("K(w) < 1 at w=" + format_point(w));
    return k;
}

// Trapezoid of s -> f(theta^s w) over [0, t] with approximately the given step.
double orbit_trapezoid(const DrivingSystem& ds, const ScalarField& f, const BasePoint& w,
                       double t, double step) {
    if (t == 0.0) return 0.0;
    int n = std::max(1, static_cast<int>(std::ceil(t / step)));
    double h = t / n;
    double sum = 0.5 * (f(w) + f(ds.evolve(t, w)));
    for (int i = 1; i < n; ++i)
        sum += f(ds.evolve(i * h, w));
    return sum * h;
}

} // namespace

DichotomyBounds DichotomyBounds::tempered_exp(DrivingPtr driving, ScalarField K, ScalarField a, ScalarField b) {
    DichotomyBounds db;
    db.family_ = Family::TemperedExp;
    db.driving_ = driving;
    db.K_ = K;
    db.plus_ = [K, a](double t, const BasePoint& w) {
        return checked_K(K, w) * std::exp(a(w) * t);
    };
    db.minus_ = [K, b, driving](double t, const BasePoint& w) {
        return checked_K(K, driving->evolve(t, w)) * std::exp(b(w) * t);
    };
    return db;
}

DichotomyBounds DichotomyBounds::integral_exp(DrivingPtr driving, ScalarField K, ScalarField a,
                                              ScalarField b, double quad_step) {
    if (!(quad_step > 0.0))
        throw std::invalid_argument("integral_exp: quad_step must be positive");
    if (driving->time_domain() == TimeDomain::Discrete)
        return birkhoff_exp(driving, K, a, b);
    DichotomyBounds db;
    db.family_ = Family::IntegralExp;
    db.driving_ = driving;
    db.K_ = K;
    db.plus_ = [K, a, driving, quad_step](double t, const BasePoint& w) {
        return checked_K(K, w) * std::exp(orbit_trapezoid(*driving, a, w, t, quad_step));
    };
    db.minus_ = [K, b, driving, quad_step](double t, const BasePoint& w) {
        return checked_K(K, driving->evolve(t, w)) * std::exp(orbit_trapezoid(*driving, b, w, t, quad_step));
    };
    return db;
}

DichotomyBounds DichotomyBounds::birkhoff_exp(DrivingPtr driving, ScalarField K, ScalarField a, ScalarField b) {
    DichotomyBounds db;
    db.family_ = Family::BirkhoffExp;
    db.driving_ = driving;
    db.K_ = K;
    db.plus_ = [K, a, driving](double n, const BasePoint& w) {
        return checked_K(K, w) * std::exp(birkhoff_sum(a, n, w, *driving));
    };
    db.minus_ = [K, b, driving](double n, const BasePoint& w) {
        return checked_K(K, driving->evolve(n, w)) * std::exp(birkhoff_sum(b, n, w, *driving));
    };
    return db;
}

DichotomyBounds DichotomyBounds::ratio_form(DrivingPtr driving, ScalarField K, ScalarField a, ScalarField b) {
    DichotomyBounds db;
    db.family_ = Family::RatioForm;
    db.driving_ = driving;
    db.K_ = K;
    db.plus_ = [K, a, driving](double t, const BasePoint& w) {
        return checked_K(K, w) * a(w) / a(driving->evolve(t, w));
    };
    db.minus_ = [K, b, driving](double t, const BasePoint& w) {
        BasePoint w_t = driving->evolve(t, w);
        return checked_K(K, w_t) * b(w) / b(w_t);
    };
    return db;
}

DichotomyBounds DichotomyBounds::custom(DrivingPtr driving, BoundFn alpha_plus, BoundFn alpha_minus) {
    DichotomyBounds db;
    db.family_ = Family::Custom;
    db.driving_ = driving;
    db.plus_ = std::move(alpha_plus);
    db.minus_ = std::move(alpha_minus);
    return db;
}

double DichotomyBounds::alpha_plus(double t, const BasePoint& w) const {
    return checked(plus_(t, w), "alpha^+", t, w);
}

double DichotomyBounds::alpha_minus(double t, const BasePoint& w) const {
    return checked(minus_(t, w), "alpha^-", t, w);
}

double DichotomyBounds::K(const BasePoint& w) const {
    if (!K_)
        throw std::logic_error("DichotomyBounds: this family does not carry K");
    return checked_K(K_, w);
}

} // namespace perron
