#pragma once

#include "perron/cocycle.hpp"
#include "perron/perturbation.hpp"

#include <vector>

namespace perron {

// Constants of the fixed-point space, determined by sigma and tau alone:
// M is the root in ]1,2[ of tau M^2 - (1+tau-sigma) M + 1 = 0 and
// N = tau M / (1 - tau M); then sigma = (M-1)/(M(1+N)) and
// tau = N/(M(1+N)) hold by construction and are re-verified by
// substitution before the constants are handed out.
struct MNConstants {
    double M = 1.0;
    double N = 0.0;
    double C = 1.0; // M(1+N)
    double q = 0.0; // (sigma+tau) max{1+N, M}
    double sigma_residual = 0.0;
    double tau_residual = 0.0;
};

struct AdmissibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractionViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

MNConstants solve_MN(double sigma, double tau);

// Tensor-product grid in E-coordinates: per-axis symmetric nodes with an
// odd point count so that 0 is a node.
class XiGrid {
public:
    XiGrid() = default;
    XiGrid(int dim, double extent, int points_per_axis);

    int dim() const { return dim_; }
    double extent() const { return extent_; }
    int points_per_axis() const { return points_; }
    int total_points() const { return total_; }
    double spacing() const { return spacing_; }
    int zero_index() const { return zero_index_; }

    Vec point(int flat) const;
    double axis_coord(int i) const { return -extent_ + i * spacing_; }

    // Multilinear interpolation of per-node rows of `values` at xi.
    // Queries outside the box are clamped to the boundary; *clamps is
    // incremented when that happens.
    Vec interpolate(const Mat& values, const Vec& xi, long* clamps) const;

private:
    int dim_ = 0;
    double extent_ = 0.0;
    int points_ = 0;
    int total_ = 0;
    double spacing_ = 0.0;
    int zero_index_ = 0;
};

// Tabulated graph function xi -> phi_w(xi) in F_w over the fiber window.
struct GraphFunction {
    std::vector<BasePoint> fibers;
    XiGrid grid;
    double fiber_step = 1.0;  // time between consecutive fibers
    std::vector<Mat> values;  // per fiber: total_points x dim_F, F-basis coords
    std::vector<Mat> basis_E; // per fiber
    std::vector<Mat> basis_F;
    double lipschitz_bound = 0.0; // N
    int reported_fibers = 0;      // CSV export covers 0..reported_fibers

    Vec eval_coords(int fiber, const Vec& xi, long* clamps = nullptr) const {
        return grid.interpolate(values[static_cast<std::size_t>(fiber)], xi, clamps);
    }
};

// Tabulated trajectories h_{t,w}(xi) in E_{theta^t w} on the solver time grid.
struct TrajectoryFamily {
    std::vector<BasePoint> fibers;
    XiGrid grid;
    double time_step = 1.0;
    // values[fiber][time index]: total_points x dim_E
    std::vector<std::vector<Mat>> values;
    double bound_M = 1.0;
};

struct SolverOptions {
    int k_max = 40;        // fibers reported/consumed downstream
    int time_points = 40;  // h tabulated at t = 0..time_points (times time_step)
    double time_step = 1.0;
    int l_truncation = 40; // terms (discrete) / nodes (continuous) in L
    double xi_extent = 1.0;
    int xi_points = 41;
    double stop_tol = 1e-8;
    int max_iterations = 200;
    double ratio_tol = 1e-6;
    double membership_tol = 1e-6;
    int threads = 1;
};

struct ApplyStats {
    long clamp_count = 0;
    long offwindow_reads = 0;
};

// Precomputed per-fiber data for the solve: orbit points, splitting frames,
// one-step cocycle matrices and their kernel-restricted inverses, and the
// alpha^+ weight table for the d_1 metric.
class SolverContext {
public:
    SolverContext(const SplitCocycle& cocycle, const DichotomyBounds& bounds,
                  const Perturbation& f, BasePoint anchor, SolverOptions opt);

    const SolverOptions& options() const { return opt_; }
    const SplitCocycle& cocycle() const { return *cocycle_; }
    const DichotomyBounds& bounds() const { return *bounds_; }
    const Perturbation& perturbation() const { return *f_; }
    bool discrete() const { return discrete_; }

    int window() const { return window_; } // tables cover fibers 0..window()
    int dim_E() const { return dim_e_; }
    int dim_F() const { return dim_f_; }
    const XiGrid& grid() const { return grid_; }

    const BasePoint& fiber_point(int j) const { return points_[static_cast<std::size_t>(j)]; }
    const FiberFrame& frame(int j) const { return frames_[static_cast<std::size_t>(j)]; }
    const Mat& one_step(int j) const { return one_step_[static_cast<std::size_t>(j)]; }
    const Mat& restricted_step_inverse(int j) const { return restr_inv_[static_cast<std::size_t>(j)]; }
    double alpha_plus_weight(int time_idx, int fiber) const {
        return alpha_table_[static_cast<std::size_t>(fiber) * static_cast<std::size_t>(opt_.time_points + 1) +
                            static_cast<std::size_t>(time_idx)];
    }
    double xi_norm(int fiber, int grid_index) const {
        return xi_norms_[static_cast<std::size_t>(fiber) * static_cast<std::size_t>(grid_.total_points()) +
                         static_cast<std::size_t>(grid_index)];
    }

private:
    const SplitCocycle* cocycle_;
    const DichotomyBounds* bounds_;
    const Perturbation* f_;
    SolverOptions opt_;
    bool discrete_ = true;
    int window_ = 0;
    int matrix_window_ = 0;
    int dim_e_ = 0;
    int dim_f_ = 0;
    XiGrid grid_;
    std::vector<BasePoint> points_;
    std::vector<FiberFrame> frames_;
    std::vector<Mat> one_step_;
    std::vector<Mat> restr_inv_;
    std::vector<double> alpha_table_;
    std::vector<double> xi_norms_;
};

// One iterate of the operator pair (J, L).
struct LpState {
    std::vector<std::vector<Mat>> h; // [fiber][time]: total_points x dim_E
    std::vector<Mat> phi;            // [fiber]: total_points x dim_F
};

// h^0_{t,w}(xi) = Phi^t_w xi restricted to E, phi^0 = 0.
LpState initial_state(const SolverContext& ctx);

std::vector<std::vector<Mat>> apply_J(const SolverContext& ctx, const LpState& state, ApplyStats& stats);
std::vector<Mat> apply_L(const SolverContext& ctx, const LpState& state, ApplyStats& stats);

// d_1: sup of ||h - g|| / (alpha^+_{t,w} ||xi||) over tabulated entries, xi != 0.
double metric_d1(const SolverContext& ctx, const std::vector<std::vector<Mat>>& ha,
                 const std::vector<std::vector<Mat>>& hb);
// d_2: sup of ||phi - psi|| / ||xi||.
double metric_d2(const SolverContext& ctx, const std::vector<Mat>& pa, const std::vector<Mat>& pb);

// Residual of the equivalence identity tying h and phi together at the
// fixed point, in its backward-mapped form
//   phi_w(xi) = Phihat^{-t} phi_{theta^t w}(h_{t,w}(xi))
//               - sum_{k<t} Phihat^{-(k+1)} Q f(h_k, phi(h_k))
// (the forward form multiplied by Phi^t amplifies table error along the
// repelling direction; mapping back keeps the comparison conditioned).
// Max over tabulated (t, fiber, xi != 0), relative to ||xi||.
double equivalence_residual(const SolverContext& ctx, const LpState& state);

struct SolveResult {
    SigmaTau sigma_tau;
    MNConstants mn;
    bool converged = false;
    int iterations = 0;
    std::vector<double> d1_steps, d2_steps, d_steps;
    std::vector<double> ratios;
    double final_step = 0.0;
    long clamp_count = 0;
    long offwindow_reads = 0;
    bool degraded = false; // clamp_count > 0
    double l_tail_bound = 0.0; // M(1+N) * tau tail, relative to ||xi||
    // d(T(fix), fix) measured after convergence
    double fixed_point_residual_d1 = 0.0;
    double fixed_point_residual_d2 = 0.0;
    // finite-horizon equivalence identity at the fixed point
    double equivalence_residual = 0.0;
    // worst sampled membership margins (<= 0 means within bound)
    double membership_excess_h = 0.0;
    double membership_excess_phi = 0.0;
    // residual budget for downstream invariance checks
    double budget_stop_tol = 0.0;
    double budget_tail = 0.0;
    double budget_grid = 0.0;
    double budget_total() const { return budget_stop_tol + budget_tail + budget_grid; }

    GraphFunction phi;
    TrajectoryFamily h;
};

// Banach iteration of T = (J, L) from the default initial state.  Throws
// AdmissibilityError when sigma+tau+tail >= 1/2 and ContractionViolation
// when a measured step ratio exceeds q beyond tolerance.
SolveResult iterate_T(const SolverContext& ctx, const SigmaTau& sigma_tau);

} // namespace perron
