#pragma once

#include "perron/perturbation.hpp"

#include <string>
#include <vector>

namespace perron {

// Hypothesis checkers for the six sufficient-condition corollaries.
// c32/c33/c34 are the continuous-time tempered / integral-exponent / ratio
// families, c42/c43/c44 their discrete counterparts.  Only hypotheses are
// verified here; the conclusions are certified downstream by the solver.
enum class CorollaryKind { C32, C33, C34, C42, C43, C44 };

CorollaryKind corollary_from_id(const std::string& id);
std::string corollary_id(CorollaryKind kind);
bool corollary_is_discrete(CorollaryKind kind);

struct CorollaryData {
    DrivingPtr driving;
    ScalarField K;     // K(w) >= 1
    ScalarField a;
    ScalarField b;
    ScalarField G;     // integral/sum over the full orbit <= 1
    ScalarField lip;   // declared Lip(f_w)
    ScalarField gamma; // c32/c42 only
    double delta = 0.0;
};

struct CorollaryHorizons {
    double g_horizon = 40.0;      // truncation of sum/integral of G
    double temper_horizon = 40.0; // window for lambda_{K,gamma,w}
    double decay_horizon = 40.0;  // window for limit surrogates
    double decay_tol = 0.01;      // surrogate threshold at the horizon
    double quad_step = 0.1;       // continuous quadrature step
    double fd_step_scale = 1e-4;  // central-difference step scale
};

struct HypothesisCheck {
    std::string name;
    bool pass = false;
    double margin = 0.0; // >= 0 satisfied; worst value over the samples
    std::string witness;
};

struct HypothesisReport {
    CorollaryKind kind = CorollaryKind::C42;
    std::vector<HypothesisCheck> checks;
    bool pass = false;
    CorollaryHorizons horizons;
};

HypothesisReport check_corollary(CorollaryKind kind, const CorollaryData& data,
                                 const std::vector<BasePoint>& samples,
                                 const CorollaryHorizons& horizons = {});

// Bounds and perturbation induced by the corollary data, for feeding the
// same inputs to compute_sigma / compute_tau and the solver.
DichotomyBounds corollary_bounds(CorollaryKind kind, const CorollaryData& data, double quad_step);

} // namespace perron
