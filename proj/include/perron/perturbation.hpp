#pragma once

#include "perron/bounds.hpp"
#include "perron/types.hpp"

#include <vector>

namespace perron {

using PerturbationFn = std::function<Vec(const BasePoint&, const Vec&)>;

// Thrown when a sampled difference quotient beats the declared Lipschitz
// constant; carries the witness pair.
struct LipViolation : std::runtime_error {
    LipViolation(std::string msg, Vec x_, Vec y_, double quotient_, double declared_)
        : std::runtime_error(std::move(msg)), x(std::move(x_)), y(std::move(y_)),
          quotient(quotient_), declared(declared_) {}
    Vec x, y;
    double quotient;
    double declared;
};

// A fiber-preserving perturbation f_w with f_w(0) = 0 and a declared
// per-fiber Lipschitz constant.  The true Lipschitz sup is not computable;
// the declared value is what the solver's guarantees consume, and
// lip_scan audits it against sampled quotients.
class Perturbation {
public:
    Perturbation(PerturbationFn f, ScalarField lip, NormKind norm = NormKind::MaxNorm,
                 std::string tag = {});

    static Perturbation zero(int dim);
    // f_w(x1, x2) = c(w) * (sin(x1 + x2)/2, sin(x1)/2); Lip(f_w) = c(w) in max norm
    static Perturbation sine2d(ScalarField scale);

    Vec eval(const BasePoint& w, const Vec& x) const;
    double lip(const BasePoint& w) const;
    NormKind norm_kind() const { return norm_; }
    const std::string& tag() const { return tag_; }

private:
    PerturbationFn f_;
    ScalarField lip_;
    NormKind norm_;
    std::string tag_;
};

// Max sampled difference quotient over the given point pairs.  Throws
// LipViolation if it exceeds the declared lip(w) by more than rel_tol.
double lip_scan(const Perturbation& p, const BasePoint& w,
                const std::vector<std::pair<Vec, Vec>>& pairs, double rel_tol = 1e-9);

struct SigmaTau {
    double sigma = 0.0;
    double tau = 0.0;
    double tau_tail_bound = 0.0;
    double sigma_horizon = 0.0;   // sup over t was restricted to [0, horizon]
    double tau_truncation = 0.0;  // tail integral/sum cut at this time/index
    bool tail_available = true;   // false: no decay detected, admissibility fails closed

    // solvability condition sigma + tau < 1/2, with the truncation tail charged
    // against the budget.
    bool admissible() const {
        return tail_available && sigma + tau + tau_tail_bound < 0.5;
    }
    double total() const { return sigma + tau + tau_tail_bound; }
};

SigmaTau merge_sigma_tau(const SigmaTau& sigma_part, const SigmaTau& tau_part);

// sup_{t <= horizon} (1/alpha^+_{t,w}) * sum/integral of
// alpha^+_{t-s,theta^s w} Lip(f_{theta^s w}) alpha^+_{s,w}.  Continuous-time
// integrals use composite trapezoid with the given step; the sup over t is
// evaluated on the same grid.
SigmaTau compute_sigma(const DichotomyBounds& bounds, const Perturbation& p, const BasePoint& w,
                       double horizon, double quad_step = 0.0);

// Truncated tail quantity tau plus a geometric tail bound.  The bound is
// (last term) * r/(1-r) with r the largest successive-term ratio over the
// final quarter of the horizon; if no decay is detected (r >= 1) the tail
// is unavailable and admissibility fails closed.
SigmaTau compute_tau(const DichotomyBounds& bounds, const Perturbation& p, const BasePoint& w,
                     double truncation, double quad_step = 0.0);

struct TemperednessReport {
    double lambda = 0.0; // finite-horizon estimate of sup_t e^{-gamma |t|} K(theta^t w)
    double gamma = 0.0;
    double horizon = 0.0;
    // the sampled sup still grows at the horizon edge; evidence of a
    // non-tempered K
    bool diverging = false;
};

TemperednessReport temperedness_lambda(const ScalarField& K, double gamma, const BasePoint& w,
                                       double horizon, const DrivingSystem& ds);

} // namespace perron
