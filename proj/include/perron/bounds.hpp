#pragma once

#include "perron/driving.hpp"
#include "perron/types.hpp"

namespace perron {

using BoundFn = std::function<double(double, const BasePoint&)>;

// Generalized dichotomy bound functions.  Both evaluators are indexed by
// the departure point w: alpha_plus(t, w) bounds ||Phi^t_w P_w|| and
// alpha_minus(t, w) bounds the backward norm along the kernel at the
// arrival fiber theta^t w (the quantity written alpha^-_{t, theta^t w}).
class DichotomyBounds {
public:
    enum class Family { TemperedExp, IntegralExp, BirkhoffExp, RatioForm, Custom };

    // alpha^+ = K(w) e^{a(w) t},  alpha^- = K(theta^t w) e^{b(w) t}
    static DichotomyBounds tempered_exp(DrivingPtr driving, ScalarField K, ScalarField a, ScalarField b);
    // alpha^+ = K(w) e^{int_0^t a(theta^r w) dr}, trapezoid with the given step
    static DichotomyBounds integral_exp(DrivingPtr driving, ScalarField K, ScalarField a, ScalarField b,
                                        double quad_step);
    // discrete counterpart: alpha^+ = K(w) e^{S_a(n,w)}
    static DichotomyBounds birkhoff_exp(DrivingPtr driving, ScalarField K, ScalarField a, ScalarField b);
    // alpha^+ = K(w) a(w)/a(theta^t w),  alpha^- = K(theta^t w) b(w)/b(theta^t w)
    static DichotomyBounds ratio_form(DrivingPtr driving, ScalarField K, ScalarField a, ScalarField b);
    static DichotomyBounds custom(DrivingPtr driving, BoundFn alpha_plus, BoundFn alpha_minus);

    double alpha_plus(double t, const BasePoint& w) const;
    double alpha_minus(double t, const BasePoint& w) const;

    Family family() const { return family_; }
    const DrivingSystem& driving() const { return *driving_; }
    const DrivingPtr& driving_ptr() const { return driving_; }

    // K(w), when the family carries one (throws for Custom).
    double K(const BasePoint& w) const;
    bool has_K() const { return static_cast<bool>(K_); }

private:
    DichotomyBounds() = default;

    Family family_ = Family::Custom;
    DrivingPtr driving_;
    ScalarField K_;
    BoundFn plus_;
    BoundFn minus_;
};

} // namespace perron
