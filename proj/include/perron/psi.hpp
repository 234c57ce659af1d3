#pragma once

#include "perron/cocycle.hpp"
#include "perron/perturbation.hpp"
#include "perron/solver.hpp"

namespace perron {

// Psi^n_w x by the one-step recursion x_{k+1} = Phi^1_{theta^k w} x_k + f_{theta^k w}(x_k).
Vec evaluate_psi_discrete(const SplitCocycle& c, const Perturbation& f, double n,
                          const BasePoint& w, const Vec& x);

// Independent route: the closed-form variation-of-constants sum
// Psi^n_w x = Phi^n_w x + sum_k Phi^{n-k-1}_{theta^{k+1} w} f_{theta^k w}(Psi^k_w x).
Vec evaluate_psi_discrete_sum(const SplitCocycle& c, const Perturbation& f, double n,
                              const BasePoint& w, const Vec& x);

// First-order stepper u_{j+1} = Phi^h_{theta^{t_j} w}(u_j + h f_{theta^{t_j} w}(u_j))
// on a uniform grid; consistent with the integral equation to O(h).
Vec evaluate_psi_continuous(const SplitCocycle& c, const Perturbation& f, double t,
                            const BasePoint& w, const Vec& x, double step);

// Defect of the stepper trajectory against the integral equation
// u(t) = Phi^t x + int_0^t Phi^{t-s} f(u(s)) ds, with the integral evaluated
// by trapezoid on the stepper's own grid.
double psi_continuous_defect(const SplitCocycle& c, const Perturbation& f, double t,
                             const BasePoint& w, const Vec& x, double step);

struct InvarianceSample {
    int fiber = 0;  // index into GraphFunction::fibers
    double t = 0.0; // must land on a tabulated fiber: fiber + t/dt integral
    Vec xi;         // E-coordinates at the start fiber
};

struct InvarianceReport {
    double max_residual = 0.0; // ||F-part - phi(E-part)|| / ||xi||, worst sample
    double budget = 0.0;
    bool pass = false;
    std::size_t samples = 0;
    InvarianceSample witness;
};

// Evolves (xi, phi_w(xi)) by Psi and compares the F-part at the arrival
// fiber against phi there.  `budget` is the solver-provided tolerance
// (stop tol + L tail + grid allowance).  psi_step is used in continuous
// time; ignored for discrete systems.
InvarianceReport check_invariance(const SplitCocycle& c, const Perturbation& f,
                                  const GraphFunction& phi,
                                  const std::vector<InvarianceSample>& samples,
                                  double budget, double psi_step = 0.0);

struct GrowthSample {
    int fiber = 0;
    double t = 0.0;
    Vec xi;
    Vec xi_bar;
};

struct GrowthReport {
    double worst_ratio = 0.0; // ||Delta Psi|| / (alpha^+ ||xi - xi_bar||)
    double limit = 0.0;       // C = M(1+N)
    bool pass = false;
    std::size_t samples = 0;
    GrowthSample witness;
};

GrowthReport check_growth_bound(const SplitCocycle& c, const Perturbation& f,
                                const GraphFunction& phi, double C, const DichotomyBounds& bounds,
                                const std::vector<GrowthSample>& samples, double rel_tol,
                                double psi_step = 0.0);

} // namespace perron
