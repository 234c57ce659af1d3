#pragma once

#include "perron/driving.hpp"
#include "perron/norms.hpp"
#include "perron/types.hpp"

#include <memory>
#include <vector>

namespace perron {

using CocycleMap = std::function<Mat(double, const BasePoint&)>;   // (t, w) -> Phi^t_w
using ProjectionMap = std::function<Mat(const BasePoint&)>;        // w -> P_w
using FactorMap = std::function<double(double, const BasePoint&)>; // (t, w) -> scalar factor

// Orthonormal bases of the splitting at one fiber, extracted from P_w by
// pivoted orthogonalization: basis_E spans range(P_w), basis_F spans
// ker(P_w) = range(I - P_w).
struct FiberFrame {
    Mat P;       // d x d projection
    Mat Q;       // Id - P
    Mat basis_E; // d x r
    Mat basis_F; // d x (d - r)
    int rank = 0;

    Vec to_E_coords(const Vec& ambient) const { return basis_E.transpose() * ambient; }
    Vec to_F_coords(const Vec& ambient) const { return basis_F.transpose() * ambient; }
};

// A vector split along E_w + F_w, stored in the fiber's bases.
struct SplitVector {
    BasePoint w;
    Vec xi;  // coordinates in basis_E
    Vec eta; // coordinates in basis_F
    Mat basis_E;
    Mat basis_F;

    Vec xi_ambient() const { return basis_E * xi; }
    Vec eta_ambient() const { return basis_F.cols() == 0 ? Vec::Zero(basis_E.rows()) : Vec(basis_F * eta); }
    Vec reconstruct() const { return xi_ambient() + eta_ambient(); }
};

struct SplittingReport {
    double identity_residual = 0.0;      // ||Phi^0 - Id||
    double idempotence_residual = 0.0;   // ||P^2 - P||
    double equivariance_residual = 0.0;  // ||P_{theta^t w} Phi^t - Phi^t P_w||
    double cocycle_residual = 0.0;       // ||Phi^{t+s}_w - Phi^t_{theta^s w} Phi^s_w||
    double kernel_residual = 0.0;        // ||P_{theta^t w} Phi^t v||, v in ker P_w
    double invertibility_margin = 0.0;   // min singular value of the restricted map
    double tol = 0.0;
    bool pass = false;
    std::string worst_condition;
};

struct DichotomyReport {
    bool pass = false;
    double tol = 0.0;
    // relative slack (bound - measured)/bound; negative means violation
    double worst_slack_d1 = 0.0;
    double worst_slack_d2 = 0.0;
    double witness_t_d1 = 0.0, witness_t_d2 = 0.0;
    BasePoint witness_w_d1, witness_w_d2;
    std::size_t samples = 0;
};

struct DecayReport {
    std::vector<double> times;
    std::vector<double> products; // p(t) = alpha^+_{t,w} alpha^-_{t,theta^t w}
    double final_value = 0.0;
    bool eventually_decreasing = false; // over the last half of the horizon
    bool pass = false;
    double tol = 0.0;
};

class DichotomyBounds; // bounds.hpp

// Linear cocycle over a driving system together with the projection
// field P_w defining the invariant splitting E_w = range(P_w),
// F_w = ker(P_w).  Forward times only; backward motion along F goes
// through fiber_inverse.
class SplitCocycle {
public:
    SplitCocycle(int fiber_dim, DrivingPtr driving, CocycleMap phi, ProjectionMap proj,
                 NormKind norm = NormKind::MaxNorm);

    int fiber_dim() const { return fiber_dim_; }
    NormKind norm_kind() const { return norm_; }
    const DrivingSystem& driving() const { return *driving_; }
    const DrivingPtr& driving_ptr() const { return driving_; }

    Mat phi(double t, const BasePoint& w) const;
    Mat proj_P(const BasePoint& w) const;
    Mat proj_Q(const BasePoint& w) const;
    FiberFrame frame(const BasePoint& w) const;

private:
    int fiber_dim_;
    DrivingPtr driving_;
    CocycleMap phi_;
    ProjectionMap proj_;
    NormKind norm_;
};

SplitVector split(const SplitCocycle& c, const BasePoint& w, const Vec& x);

// Phi^t_w x for t >= 0.
Vec evolve_linear(const SplitCocycle& c, double t, const BasePoint& w, const Vec& x);

// The unique v in ker P_w with Phi^t_w v = eta, for eta in ker P_{theta^t w}.
// Solved as a least-squares problem restricted to the kernel basis; throws
// if eta is not in the kernel fiber or the restricted map is singular.
// The least-squares residual is written to *residual_out when given.
Vec fiber_inverse(const SplitCocycle& c, double t, const BasePoint& w, const Vec& eta,
                  double tol = 1e-9, double* residual_out = nullptr);

// The matrix of x -> (Phi^t_w|_{ker P_w})^{-1} Q_{theta^t w} x.
Mat fiber_inverse_times_Q(const SplitCocycle& c, double t, const BasePoint& w, double tol = 1e-9);

SplittingReport verify_splitting(const SplitCocycle& c,
                                 const std::vector<double>& sample_times,
                                 const std::vector<BasePoint>& sample_points,
                                 double tol);

DichotomyReport verify_dichotomy(const SplitCocycle& c, const DichotomyBounds& bounds,
                                 const std::vector<double>& sample_times,
                                 const std::vector<BasePoint>& sample_points,
                                 double tol);

// Tabulates p(t) = alpha^+_{t,w} alpha^-_{t,theta^t w} up to the horizon and
// checks the finite-horizon surrogate of p(t) -> 0: p(T) <= tol and p
// non-increasing with strict overall decrease over the last half.  This is
// evidence, not a proof of the limit.
DecayReport check_decay_condition(const SplitCocycle& c, const DichotomyBounds& bounds,
                                  const BasePoint& w, double horizon, double tol);

// The 2-D cocycle Phi^t_w = phi(t,w) P_w + (K(w)/K(theta^t w)) (1/psi(t,w)) Q_{theta^t w}
// with P_w(x1,x2) = (x1 + (K(w)-1) x2, 0).  The factor law
// phi(t+s,w) = phi(t,theta^s w) phi(s,w) is spot-checked at construction.
SplitCocycle split_factor_cocycle(ScalarField K, FactorMap phi, FactorMap psi,
                              DrivingPtr driving, NormKind norm = NormKind::MaxNorm);

// S_Z(n, w) = sum_{r=0}^{n-1} Z(theta^r w).
double birkhoff_sum(const ScalarField& Z, double n, const BasePoint& w, const DrivingSystem& ds);

} // namespace perron
