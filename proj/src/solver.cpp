#include "perron/solver.hpp"

#include "perron/parallel.hpp"

#include <Eigen/LU>

#include <array>
#include <cmath>

namespace perron {

MNConstants solve_MN(double sigma, double tau) {
    if (!(sigma >= 0.0) || !(tau >= 0.0))
        throw std::invalid_argument("solve_MN: sigma and tau must be nonnegative");
    if (!(sigma + tau < 0.5))
        throw AdmissibilityError("solve_MN: sigma + tau = " + std::to_string(sigma + tau) +
                                 " is not below 1/2");
    MNConstants mn;
    if (tau == 0.0) {
        // N = 0 and sigma = (M-1)/M
        mn.M = 1.0 / (1.0 - sigma);
        mn.N = 0.0;
    } else {
        // root in ]1,2[ of tau M^2 - (1+tau-sigma) M + 1 = 0, via the
        // cancellation-free branch (product of roots is 1/tau)
        double b = 1.0 + tau - sigma;
        double disc = b * b - 4.0 * tau;
        mn.M = 2.0 / (b + std::sqrt(disc));
        mn.N = tau * mn.M / (1.0 - tau * mn.M);
    }
    mn.C = mn.M * (1.0 + mn.N);
    mn.q = (sigma + tau) * std::max(1.0 + mn.N, mn.M);
    mn.sigma_residual = std::abs(sigma - (mn.M - 1.0) / (mn.M * (1.0 + mn.N)));
    mn.tau_residual = std::abs(tau - mn.N / (mn.M * (1.0 + mn.N)));
    if (mn.sigma_residual > 1e-12 || mn.tau_residual > 1e-12)
        throw std::runtime_error("solve_MN: identity residuals exceed 1e-12");
    if (!(mn.M >= 1.0 && mn.M < 2.0 && mn.N >= 0.0 && mn.N < 1.0))
        throw std::runtime_error("solve_MN: constants escaped their ranges");
    return mn;
}

XiGrid::XiGrid(int dim, double extent, int points_per_axis)
    : dim_(dim), extent_(extent), points_(points_per_axis) {
    if (dim < 0)
        throw std::invalid_argument("XiGrid: dimension must be nonnegative");
    if (!(extent > 0.0))
        throw std::invalid_argument("XiGrid: extent must be positive");
    if (points_per_axis < 3 || points_per_axis % 2 == 0)
        throw std::invalid_argument("XiGrid: points per axis must be odd and >= 3 so the grid contains 0");
    total_ = 1;
    for (int a = 0; a < dim; ++a) {
        if (total_ > 1'000'000 / points_)
            throw std::invalid_argument("XiGrid: grid too large");
        total_ *= points_;
    }
    spacing_ = 2.0 * extent / (points_ - 1);
    int mid = (points_ - 1) / 2;
    zero_index_ = 0;
    int stride = 1;
    for (int a = 0; a < dim; ++a) {
        zero_index_ += mid * stride;
        stride *= points_;
    }
}

Vec XiGrid::point(int flat) const {
    Vec p(dim_);
    for (int a = 0; a < dim_; ++a) {
        int idx = flat % points_;
        flat /= points_;
        int mid = (points_ - 1) / 2;
        // exact zero at the midpoint
        p[a] = idx == mid ? 0.0 : axis_coord(idx);
    }
    return p;
}

Vec XiGrid::interpolate(const Mat& values, const Vec& xi, long* clamps) const {
    if (xi.size() != dim_)
        throw std::invalid_argument("XiGrid::interpolate: dimension mismatch");
    if (dim_ == 0)
        return values.row(0);

    bool clamped = false;
    std::array<int, 8> cell{};
    std::array<double, 8> frac{};
    if (dim_ > 8)
        throw std::invalid_argument("XiGrid::interpolate: dimension too large");
    for (int a = 0; a < dim_; ++a) {
        double u = (xi[a] + extent_) / spacing_;
        if (u < 0.0) {
            u = 0.0;
            clamped = true;
        }
        if (u > points_ - 1) {
            u = points_ - 1;
            clamped = true;
        }
        int i = std::min(static_cast<int>(u), points_ - 2);
        cell[static_cast<std::size_t>(a)] = i;
        frac[static_cast<std::size_t>(a)] = u - i;
    }
    if (clamped && clamps) ++(*clamps);

    Vec out = Vec::Zero(values.cols());
    int corners = 1 << dim_;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        int flat = 0;
        int stride = 1;
        for (int a = 0; a < dim_; ++a) {
            int bit = (c >> a) & 1;
            w *= bit ? frac[static_cast<std::size_t>(a)] : 1.0 - frac[static_cast<std::size_t>(a)];
            flat += (cell[static_cast<std::size_t>(a)] + bit) * stride;
            stride *= points_;
        }
        if (w != 0.0) out += w * values.row(flat).transpose();
    }
    return out;
}

SolverContext::SolverContext(const SplitCocycle& cocycle, const DichotomyBounds& bounds,
                             const Perturbation& f, BasePoint anchor, SolverOptions opt)
    : cocycle_(&cocycle), bounds_(&bounds), f_(&f), opt_(opt) {
    discrete_ = cocycle.driving().time_domain() == TimeDomain::Discrete;
    if (discrete_) opt_.time_step = 1.0;
    if (!(opt_.time_step > 0.0))
        throw std::invalid_argument("SolverContext: time_step must be positive");
    if (opt_.k_max < 1 || opt_.time_points < 1 || opt_.l_truncation < 1)
        throw std::invalid_argument("SolverContext: k_max, time_points and l_truncation must be >= 1");
    if (opt_.time_points < opt_.l_truncation)
        throw std::invalid_argument("SolverContext: time_points must cover l_truncation (L consumes h up to the truncation)");

    const int reach = std::max(opt_.time_points, opt_.l_truncation + 1);
    window_ = opt_.k_max + reach;
    matrix_window_ = window_ + reach + 1;

    const double dt = opt_.time_step;
    const DrivingSystem& ds = cocycle.driving();

    points_.resize(static_cast<std::size_t>(matrix_window_) + 1);
    frames_.resize(points_.size());
    one_step_.resize(points_.size());
    restr_inv_.resize(points_.size());
    for (int j = 0; j <= matrix_window_; ++j) {
        points_[static_cast<std::size_t>(j)] = ds.evolve(j * dt, anchor);
        frames_[static_cast<std::size_t>(j)] = cocycle.frame(points_[static_cast<std::size_t>(j)]);
    }
    dim_e_ = frames_[0].rank;
    dim_f_ = cocycle.fiber_dim() - dim_e_;
    for (const auto& fr : frames_)
        if (fr.rank != dim_e_)
            throw std::runtime_error("SolverContext: splitting rank changes along the orbit");

    // the zero-node pinning of h and phi presupposes f_w(0) = 0
    const Vec origin = Vec::Zero(cocycle.fiber_dim());
    for (int j = 0; j <= matrix_window_; ++j) {
        double r = vector_norm(f.eval(points_[static_cast<std::size_t>(j)], origin), cocycle.norm_kind());
        if (r > 1e-12)
            throw std::invalid_argument("SolverContext: f_w(0) != 0 at fiber " + std::to_string(j) +
                                        " (residual " + std::to_string(r) + ")");
    }

    for (int j = 0; j < matrix_window_; ++j) {
        one_step_[static_cast<std::size_t>(j)] = cocycle.phi(dt, points_[static_cast<std::size_t>(j)]);
        if (dim_f_ > 0) {
            Mat restricted = frames_[static_cast<std::size_t>(j) + 1].basis_F.transpose() *
                             one_step_[static_cast<std::size_t>(j)] * frames_[static_cast<std::size_t>(j)].basis_F;
            Eigen::PartialPivLU<Mat> lu(restricted);
            Mat inv = lu.solve(Mat::Identity(dim_f_, dim_f_));
            if (!inv.allFinite())
                throw std::runtime_error("SolverContext: kernel-restricted step is singular at fiber " +
                                         std::to_string(j));
            restr_inv_[static_cast<std::size_t>(j)] = inv;
        } else {
            restr_inv_[static_cast<std::size_t>(j)] = Mat(0, 0);
        }
    }

    grid_ = XiGrid(dim_e_, opt_.xi_extent, opt_.xi_points);

    alpha_table_.resize(static_cast<std::size_t>(window_ + 1) * static_cast<std::size_t>(opt_.time_points + 1));
    for (int j = 0; j <= window_; ++j)
        for (int i = 0; i <= opt_.time_points; ++i)
            alpha_table_[static_cast<std::size_t>(j) * static_cast<std::size_t>(opt_.time_points + 1) +
                         static_cast<std::size_t>(i)] =
                bounds.alpha_plus(i * dt, points_[static_cast<std::size_t>(j)]);

    const NormKind nk = cocycle.norm_kind();
    xi_norms_.resize(static_cast<std::size_t>(window_ + 1) * static_cast<std::size_t>(grid_.total_points()));
    for (int j = 0; j <= window_; ++j)
        for (int g = 0; g < grid_.total_points(); ++g)
            xi_norms_[static_cast<std::size_t>(j) * static_cast<std::size_t>(grid_.total_points()) +
                      static_cast<std::size_t>(g)] =
                vector_norm(Vec(frames_[static_cast<std::size_t>(j)].basis_E * grid_.point(g)), nk);
}

LpState initial_state(const SolverContext& ctx) {
    const int W = ctx.window();
    const int T = ctx.options().time_points;
    const int npts = ctx.grid().total_points();
    LpState st;
    st.phi.assign(static_cast<std::size_t>(W) + 1, Mat::Zero(npts, ctx.dim_F()));
    st.h.assign(static_cast<std::size_t>(W) + 1,
                std::vector<Mat>(static_cast<std::size_t>(T) + 1, Mat::Zero(npts, ctx.dim_E())));
    parallel_for(W + 1, ctx.options().threads, [&](int j) {
        auto& hj = st.h[static_cast<std::size_t>(j)];
        for (int g = 0; g < npts; ++g) {
            Vec coords = ctx.grid().point(g);
            hj[0].row(g) = coords;
            Vec a = ctx.frame(j).P * (ctx.frame(j).basis_E * coords);
            for (int i = 0; i < T; ++i) {
                a = ctx.one_step(j + i) * a;
                Vec c = ctx.frame(j + i + 1).basis_E.transpose() * a;
                hj[static_cast<std::size_t>(i) + 1].row(g) = c;
                a = ctx.frame(j + i + 1).basis_E * c;
            }
        }
        for (int i = 0; i <= T; ++i) hj[static_cast<std::size_t>(i)].row(ctx.grid().zero_index()).setZero();
    });
    return st;
}

namespace {

// phi of the previous iterate at fiber `idx`, interpolated at xi; reads
// beyond the tabulated window evaluate the zero graph.
Vec read_phi(const SolverContext& ctx, const LpState& state, int idx, const Vec& xi,
             long& clamps, long& offwindow) {
    if (idx > ctx.window()) {
        ++offwindow;
        return Vec::Zero(ctx.dim_F());
    }
    return ctx.grid().interpolate(state.phi[static_cast<std::size_t>(idx)], xi, &clamps);
}

} // namespace

std::vector<std::vector<Mat>> apply_J(const SolverContext& ctx, const LpState& state, ApplyStats& stats) {
    const int W = ctx.window();
    const int T = ctx.options().time_points;
    const int npts = ctx.grid().total_points();
    const double dt = ctx.options().time_step;
    const bool discrete = ctx.discrete();
    const Perturbation& f = ctx.perturbation();

    std::vector<std::vector<Mat>> out(static_cast<std::size_t>(W) + 1,
                                      std::vector<Mat>(static_cast<std::size_t>(T) + 1,
                                                       Mat::Zero(npts, ctx.dim_E())));
    std::vector<long> clamps(static_cast<std::size_t>(W) + 1, 0);
    std::vector<long> offwin(static_cast<std::size_t>(W) + 1, 0);

    parallel_for(W + 1, ctx.options().threads, [&](int j) {
        auto& oj = out[static_cast<std::size_t>(j)];
        const auto& hj = state.h[static_cast<std::size_t>(j)];
        long& cl = clamps[static_cast<std::size_t>(j)];
        long& ow = offwin[static_cast<std::size_t>(j)];
        // node value of the inner integrand/summand at time index i, from the
        // previous iterate's tables
        auto node = [&](int i, int g) {
            Vec x_coords = hj[static_cast<std::size_t>(i)].row(g);
            Vec phi_coords = read_phi(ctx, state, j + i, x_coords, cl, ow);
            Vec u = ctx.frame(j + i).basis_E * x_coords;
            if (ctx.dim_F() > 0) u += ctx.frame(j + i).basis_F * phi_coords;
            return f.eval(ctx.fiber_point(j + i), u);
        };
        for (int g = 0; g < npts; ++g) {
            Vec coords = ctx.grid().point(g);
            oj[0].row(g) = coords;
            Vec a = ctx.frame(j).P * (ctx.frame(j).basis_E * coords);
            Vec g_prev;
            for (int i = 0; i < T; ++i) {
                if (discrete) {
                    // J_{n+1} = Phi^1_{theta^n w} J_n + P_{theta^{n+1} w} f_{theta^n w}(...)
                    a = ctx.one_step(j + i) * a + ctx.frame(j + i + 1).P * node(i, g);
                } else {
                    // trapezoid of Phi^{t-s} P_{theta^s w} f(s) accumulated one step at a time
                    if (i == 0) g_prev = ctx.frame(j).P * node(0, g);
                    Vec g_next = ctx.frame(j + i + 1).P * node(i + 1, g);
                    a = ctx.one_step(j + i) * (a + 0.5 * dt * g_prev) + 0.5 * dt * g_next;
                    g_prev = g_next;
                }
                Vec c = ctx.frame(j + i + 1).basis_E.transpose() * a;
                oj[static_cast<std::size_t>(i) + 1].row(g) = c;
                a = ctx.frame(j + i + 1).basis_E * c;
            }
        }
        // h_{t,w}(0) = 0 is structural; the grid contains 0 and the value is pinned
        for (int i = 0; i <= T; ++i) oj[static_cast<std::size_t>(i)].row(ctx.grid().zero_index()).setZero();
    });

    for (long c : clamps) stats.clamp_count += c;
    for (long c : offwin) stats.offwindow_reads += c;
    return out;
}

std::vector<Mat> apply_L(const SolverContext& ctx, const LpState& state, ApplyStats& stats) {
    const int W = ctx.window();
    const int L = ctx.options().l_truncation;
    const int npts = ctx.grid().total_points();
    const double dt = ctx.options().time_step;
    const bool discrete = ctx.discrete();
    const Perturbation& f = ctx.perturbation();

    std::vector<Mat> out(static_cast<std::size_t>(W) + 1, Mat::Zero(npts, ctx.dim_F()));
    if (ctx.dim_F() == 0) return out; // F = {0}: the graph is trivially zero

    std::vector<long> clamps(static_cast<std::size_t>(W) + 1, 0);
    std::vector<long> offwin(static_cast<std::size_t>(W) + 1, 0);

    parallel_for(W + 1, ctx.options().threads, [&](int j) {
        auto& oj = out[static_cast<std::size_t>(j)];
        const auto& hj = state.h[static_cast<std::size_t>(j)];
        long& cl = clamps[static_cast<std::size_t>(j)];
        long& ow = offwin[static_cast<std::size_t>(j)];
        for (int g = 0; g < npts; ++g) {
            Vec sum = Vec::Zero(ctx.dim_F());
            Mat r = Mat::Identity(ctx.dim_F(), ctx.dim_F()); // restricted inverse back to fiber j
            for (int k = 0; k <= L; ++k) {
                Vec x_coords = hj[static_cast<std::size_t>(k)].row(g);
                Vec phi_coords = read_phi(ctx, state, j + k, x_coords, cl, ow);
                Vec u = ctx.frame(j + k).basis_E * x_coords + ctx.frame(j + k).basis_F * phi_coords;
                Vec fv = f.eval(ctx.fiber_point(j + k), u);
                if (discrete) {
                    // term: Phi^{-(k+1)} Q_{theta^{k+1} w} f_{theta^k w}(...)
                    r = r * ctx.restricted_step_inverse(j + k);
                    Vec qf = ctx.frame(j + k + 1).basis_F.transpose() * (ctx.frame(j + k + 1).Q * fv);
                    sum += r * qf;
                } else {
                    // node: Phi^{-s} Q_{theta^s w} f_{theta^s w}(...), trapezoid in s
                    Vec qf = ctx.frame(j + k).basis_F.transpose() * (ctx.frame(j + k).Q * fv);
                    double wgt = (k == 0 || k == L) ? 0.5 * dt : dt;
                    sum += wgt * (r * qf);
                    r = r * ctx.restricted_step_inverse(j + k);
                }
            }
            oj.row(g) = -sum;
        }
        // phi_w(0) = 0 pinned at the zero node
        oj.row(ctx.grid().zero_index()).setZero();
    });

    for (long c : clamps) stats.clamp_count += c;
    for (long c : offwin) stats.offwindow_reads += c;
    return out;
}

double metric_d1(const SolverContext& ctx, const std::vector<std::vector<Mat>>& ha,
                 const std::vector<std::vector<Mat>>& hb) {
    const int W = ctx.window();
    const int T = ctx.options().time_points;
    const int npts = ctx.grid().total_points();
    const NormKind nk = ctx.cocycle().norm_kind();
    if (ha.size() != hb.size() || ha.size() != static_cast<std::size_t>(W) + 1)
        throw std::invalid_argument("metric_d1: table shapes differ");
    for (std::size_t j = 0; j < ha.size(); ++j) {
        if (ha[j].size() != hb[j].size() || ha[j].size() != static_cast<std::size_t>(T) + 1)
            throw std::invalid_argument("metric_d1: table shapes differ");
        for (std::size_t i = 0; i < ha[j].size(); ++i)
            if (ha[j][i].rows() != npts || hb[j][i].rows() != npts ||
                ha[j][i].cols() != hb[j][i].cols())
                throw std::invalid_argument("metric_d1: table shapes differ");
    }
    std::vector<double> sup_per_fiber(static_cast<std::size_t>(W) + 1, 0.0);
    parallel_for(W + 1, ctx.options().threads, [&](int j) {
        double sup = 0.0;
        for (int i = 0; i <= T; ++i) {
            const Mat& a = ha[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            const Mat& b = hb[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            const Mat& lift = ctx.frame(j + i).basis_E;
            for (int g = 0; g < npts; ++g) {
                if (g == ctx.grid().zero_index()) continue;
                double num = vector_norm(Vec(lift * (a.row(g) - b.row(g)).transpose()), nk);
                double den = ctx.alpha_plus_weight(i, j) * ctx.xi_norm(j, g);
                sup = std::max(sup, num / den);
            }
        }
        sup_per_fiber[static_cast<std::size_t>(j)] = sup;
    });
    double sup = 0.0;
    for (double s : sup_per_fiber) sup = std::max(sup, s);
    return sup;
}

double metric_d2(const SolverContext& ctx, const std::vector<Mat>& pa, const std::vector<Mat>& pb) {
    const int W = ctx.window();
    const int npts = ctx.grid().total_points();
    const NormKind nk = ctx.cocycle().norm_kind();
    if (pa.size() != pb.size() || pa.size() != static_cast<std::size_t>(W) + 1)
        throw std::invalid_argument("metric_d2: table shapes differ");
    for (std::size_t j = 0; j < pa.size(); ++j)
        if (pa[j].rows() != npts || pb[j].rows() != npts || pa[j].cols() != pb[j].cols())
            throw std::invalid_argument("metric_d2: table shapes differ");
    if (ctx.dim_F() == 0) return 0.0;
    std::vector<double> sup_per_fiber(static_cast<std::size_t>(W) + 1, 0.0);
    parallel_for(W + 1, ctx.options().threads, [&](int j) {
        double sup = 0.0;
        const Mat& a = pa[static_cast<std::size_t>(j)];
        const Mat& b = pb[static_cast<std::size_t>(j)];
        const Mat& lift = ctx.frame(j).basis_F;
        for (int g = 0; g < npts; ++g) {
            if (g == ctx.grid().zero_index()) continue;
            double num = vector_norm(Vec(lift * (a.row(g) - b.row(g)).transpose()), nk);
            sup = std::max(sup, num / ctx.xi_norm(j, g));
        }
        sup_per_fiber[static_cast<std::size_t>(j)] = sup;
    });
    double sup = 0.0;
    for (double s : sup_per_fiber) sup = std::max(sup, s);
    return sup;
}

double equivalence_residual(const SolverContext& ctx, const LpState& state) {
    if (ctx.dim_F() == 0) return 0.0;
    const int W = ctx.window();
    const int T = ctx.options().time_points;
    const int npts = ctx.grid().total_points();
    const double dt = ctx.options().time_step;
    const bool discrete = ctx.discrete();
    const Perturbation& f = ctx.perturbation();
    const NormKind nk = ctx.cocycle().norm_kind();

    std::vector<double> worst(static_cast<std::size_t>(W) + 1, 0.0);
    parallel_for(W + 1, ctx.options().threads, [&](int j) {
        long cl = 0, ow = 0;
        const auto& hj = state.h[static_cast<std::size_t>(j)];
        const Mat& lift = ctx.frame(j).basis_F;
        double sup = 0.0;
        for (int g = 0; g < npts; ++g) {
            if (g == ctx.grid().zero_index()) continue;
            Vec lhs = state.phi[static_cast<std::size_t>(j)].row(g);
            Mat r = Mat::Identity(ctx.dim_F(), ctx.dim_F());
            Vec sum = Vec::Zero(ctx.dim_F());
            for (int t = 1; t <= T; ++t) {
                int k = t - 1;
                Vec x = hj[static_cast<std::size_t>(k)].row(g);
                Vec phik = read_phi(ctx, state, j + k, x, cl, ow);
                Vec u = ctx.frame(j + k).basis_E * x + ctx.frame(j + k).basis_F * phik;
                Vec fv = f.eval(ctx.fiber_point(j + k), u);
                Vec xt = hj[static_cast<std::size_t>(t)].row(g);
                Vec phit = read_phi(ctx, state, j + t, xt, cl, ow);
                if (discrete) {
                    r = r * ctx.restricted_step_inverse(j + k);
                    sum += r * (ctx.frame(j + k + 1).basis_F.transpose() * (ctx.frame(j + k + 1).Q * fv));
                } else {
                    // extending the trapezoid from [0,t-1] to [0,t] adds
                    // (dt/2)(g_{t-1} + g_t)
                    Vec g_here = r * (ctx.frame(j + k).basis_F.transpose() * (ctx.frame(j + k).Q * fv));
                    r = r * ctx.restricted_step_inverse(j + k);
                    Vec ut = ctx.frame(j + t).basis_E * xt + ctx.frame(j + t).basis_F * phit;
                    Vec g_next = r * (ctx.frame(j + t).basis_F.transpose() *
                                      (ctx.frame(j + t).Q * f.eval(ctx.fiber_point(j + t), ut)));
                    sum += 0.5 * dt * (g_here + g_next);
                }
                Vec rhs = r * phit - sum;
                double res = vector_norm(Vec(lift * (lhs - rhs)), nk) / ctx.xi_norm(j, g);
                sup = std::max(sup, res);
            }
        }
        worst[static_cast<std::size_t>(j)] = sup;
    });
    double sup = 0.0;
    for (double v : worst) sup = std::max(sup, v);
    return sup;
}

namespace {

// Worst excess of sampled Lipschitz quotients over their bounds, taken
// along grid axes.  h: quotient vs M alpha^+; phi: quotient vs N.
void membership_excess(const SolverContext& ctx, const LpState& st, const MNConstants& mn,
                       double& excess_h, double& excess_phi) {
    const int W = ctx.window();
    const int T = ctx.options().time_points;
    const XiGrid& grid = ctx.grid();
    const NormKind nk = ctx.cocycle().norm_kind();
    const int n = grid.points_per_axis();

    for (int j = 0; j <= W; ++j) {
        for (int axis = 0, stride = 1; axis < grid.dim(); ++axis, stride *= n) {
            for (int g = 0; g < grid.total_points(); ++g) {
                int idx_a = (g / stride) % n;
                if (idx_a + 1 >= n) continue;
                int g2 = g + stride;
                Vec dxi = grid.point(g2) - grid.point(g);
                double dxi_norm = vector_norm(Vec(ctx.frame(j).basis_E * dxi), nk);
                const Mat& pj = st.phi[static_cast<std::size_t>(j)];
                if (ctx.dim_F() > 0) {
                    double dq = vector_norm(Vec(ctx.frame(j).basis_F * (pj.row(g2) - pj.row(g)).transpose()), nk) / dxi_norm;
                    excess_phi = std::max(excess_phi, dq - mn.N);
                }
                for (int i = 0; i <= T; ++i) {
                    const Mat& hji = st.h[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
                    double dq = vector_norm(Vec(ctx.frame(j + i).basis_E * (hji.row(g2) - hji.row(g)).transpose()), nk) / dxi_norm;
                    excess_h = std::max(excess_h, dq - mn.M * ctx.alpha_plus_weight(i, j));
                }
            }
        }
    }
}

GraphFunction make_graph(const SolverContext& ctx, const LpState& st, const MNConstants& mn) {
    GraphFunction gf;
    gf.grid = ctx.grid();
    gf.fiber_step = ctx.options().time_step;
    gf.lipschitz_bound = mn.N;
    gf.reported_fibers = ctx.options().k_max;
    const int W = ctx.window();
    gf.fibers.reserve(static_cast<std::size_t>(W) + 1);
    for (int j = 0; j <= W; ++j) {
        gf.fibers.push_back(ctx.fiber_point(j));
        gf.basis_E.push_back(ctx.frame(j).basis_E);
        gf.basis_F.push_back(ctx.frame(j).basis_F);
    }
    gf.values = st.phi;
    return gf;
}

TrajectoryFamily make_trajectories(const SolverContext& ctx, const LpState& st, const MNConstants& mn) {
    TrajectoryFamily tf;
    tf.grid = ctx.grid();
    tf.time_step = ctx.options().time_step;
    tf.bound_M = mn.M;
    const int W = ctx.window();
    for (int j = 0; j <= W; ++j) tf.fibers.push_back(ctx.fiber_point(j));
    tf.values = st.h;
    return tf;
}

} // namespace

SolveResult iterate_T(const SolverContext& ctx, const SigmaTau& sigma_tau) {
    if (!sigma_tau.admissible())
        throw AdmissibilityError("iterate_T: sigma + tau + tail = " + std::to_string(sigma_tau.total()) +
                                 " is not admissible (< 1/2 required)");
    SolveResult res;
    res.sigma_tau = sigma_tau;
    res.mn = solve_MN(sigma_tau.sigma, sigma_tau.tau);
    res.l_tail_bound = res.mn.C * sigma_tau.tau_tail_bound;

    const SolverOptions& opt = ctx.options();
    ApplyStats stats;
    LpState state = initial_state(ctx);

    double prev_step = -1.0;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        LpState next;
        next.h = apply_J(ctx, state, stats);
        next.phi = apply_L(ctx, state, stats);
        double d1 = metric_d1(ctx, next.h, state.h);
        double d2 = metric_d2(ctx, next.phi, state.phi);
        double step = d1 + d2;
        res.d1_steps.push_back(d1);
        res.d2_steps.push_back(d2);
        res.d_steps.push_back(step);
        res.iterations = it;
        if (prev_step > 0.0) {
            double ratio = step / prev_step;
            res.ratios.push_back(ratio);
            if (step > res.mn.q * (1.0 + opt.ratio_tol) * prev_step + 1e-15)
                throw ContractionViolation(
                    "iterate_T: measured step ratio " + std::to_string(ratio) + " exceeds q = " +
                    std::to_string(res.mn.q) + " at iteration " + std::to_string(it) +
                    "; inputs are inconsistent or the quadrature is too coarse");
        }
        state = std::move(next);

        double eh = 0.0, ep = 0.0;
        membership_excess(ctx, state, res.mn, eh, ep);
        res.membership_excess_h = std::max(res.membership_excess_h, eh);
        res.membership_excess_phi = std::max(res.membership_excess_phi, ep);

        res.final_step = step;
        if (step <= opt.stop_tol) {
            res.converged = true;
            break;
        }
        prev_step = step;
    }

    // residual of the fixed point under one more application of T
    {
        LpState fixed;
        fixed.h = apply_J(ctx, state, stats);
        fixed.phi = apply_L(ctx, state, stats);
        res.fixed_point_residual_d1 = metric_d1(ctx, fixed.h, state.h);
        res.fixed_point_residual_d2 = metric_d2(ctx, fixed.phi, state.phi);
    }
    res.equivalence_residual = equivalence_residual(ctx, state);

    res.clamp_count = stats.clamp_count;
    res.offwindow_reads = stats.offwindow_reads;
    res.degraded = stats.clamp_count > 0;
    res.budget_stop_tol = opt.stop_tol;
    res.budget_tail = res.l_tail_bound;
    res.budget_grid = res.mn.N * ctx.grid().spacing();
    res.phi = make_graph(ctx, state, res.mn);
    res.h = make_trajectories(ctx, state, res.mn);
    return res;
}

} // namespace perron
