#include "perron/cocycle.hpp"
#include "perron/bounds.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace perron {

SplitCocycle::SplitCocycle(int fiber_dim, DrivingPtr driving, CocycleMap phi, ProjectionMap proj,
                           NormKind norm)
    : fiber_dim_(fiber_dim), driving_(std::move(driving)), phi_(std::move(phi)),
      proj_(std::move(proj)), norm_(norm) {
    if (fiber_dim_ <= 0)
        throw std::invalid_argument("SplitCocycle: fiber_dim must be positive");
    if (!driving_)
        throw std::invalid_argument("SplitCocycle: missing driving system");
}

Mat SplitCocycle::phi(double t, const BasePoint& w) const {
    if (t < 0.0)
        throw std::domain_error("SplitCocycle: forward cocycle, t must be >= 0");
    if (driving_->time_domain() == TimeDomain::Discrete && !is_integer_time(t))
        throw std::domain_error("SplitCocycle: non-integer time for a discrete cocycle");
    Mat m = phi_(t, w);
    if (m.rows() != fiber_dim_ || m.cols() != fiber_dim_)
        throw std::invalid_argument("SplitCocycle: phi returned a matrix of wrong size");
    return m;
}

Mat SplitCocycle::proj_P(const BasePoint& w) const {
    Mat p = proj_(w);
    if (p.rows() != fiber_dim_ || p.cols() != fiber_dim_)
        throw std::invalid_argument("SplitCocycle: proj_P returned a matrix of wrong size");
    return p;
}

Mat SplitCocycle::proj_Q(const BasePoint& w) const {
    return Mat::Identity(fiber_dim_, fiber_dim_) - proj_P(w);
}

namespace {

// First k columns of the Q factor of a column-pivoted QR of m, where k is
// the numerical rank; orthonormal basis of range(m).
Mat range_basis(const Mat& m, int rank) {
    if (rank == 0) return Mat(m.rows(), 0);
    Eigen::ColPivHouseholderQR<Mat> qr(m);
    Mat q = qr.householderQ();
    return q.leftCols(rank);
}

} // namespace

FiberFrame SplitCocycle::frame(const BasePoint& w) const {
    FiberFrame fr;
    fr.P = proj_P(w);
    fr.Q = Mat::Identity(fiber_dim_, fiber_dim_) - fr.P;
    double tr = fr.P.trace();
    fr.rank = static_cast<int>(std::lround(tr));
    if (fr.rank < 0 || fr.rank > fiber_dim_ || std::abs(tr - fr.rank) > 1e-8)
        throw std::runtime_error("frame: P_w trace is not close to an integer; not a projection?");
    fr.basis_E = range_basis(fr.P, fr.rank);
    fr.basis_F = range_basis(fr.Q, fiber_dim_ - fr.rank);
    return fr;
}

SplitVector split(const SplitCocycle& c, const BasePoint& w, const Vec& x) {
    if (x.size() != c.fiber_dim())
        throw std::invalid_argument("split: vector dimension mismatch");
    FiberFrame fr = c.frame(w);
    SplitVector sv;
    sv.w = w;
    sv.basis_E = fr.basis_E;
    sv.basis_F = fr.basis_F;
    sv.xi = fr.to_E_coords(fr.P * x);
    sv.eta = fr.to_F_coords(fr.Q * x);
    return sv;
}

Vec evolve_linear(const SplitCocycle& c, double t, const BasePoint& w, const Vec& x) {
    if (x.size() != c.fiber_dim())
        throw std::invalid_argument("evolve_linear: vector dimension mismatch");
    return c.phi(t, w) * x;
}

namespace {

struct RestrictedSolve {
    Vec v;             // preimage in ker P_w (ambient coordinates)
    double residual;   // ||Phi^t v - eta||
    double sigma_min;  // smallest singular value of the restricted map
};

RestrictedSolve solve_restricted(const SplitCocycle& c, double t, const BasePoint& w, const Vec& eta) {
    FiberFrame from = c.frame(w);
    const int k = c.fiber_dim() - from.rank;
    if (k == 0) {
        // F_w = {0}; only eta = 0 has a preimage.
        RestrictedSolve rs;
        rs.v = Vec::Zero(c.fiber_dim());
        rs.residual = vector_norm(eta, c.norm_kind());
        rs.sigma_min = std::numeric_limits<double>::infinity();
        return rs;
    }
    Mat a = c.phi(t, w) * from.basis_F; // d x k
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    RestrictedSolve rs;
    rs.sigma_min = svd.singularValues()(k - 1);
    Vec coords = svd.solve(eta);
    rs.v = from.basis_F * coords;
    rs.residual = vector_norm(Vec(a * coords - eta), c.norm_kind());
    return rs;
}

} // namespace

Vec fiber_inverse(const SplitCocycle& c, double t, const BasePoint& w, const Vec& eta, double tol,
                  double* residual_out) {
    if (eta.size() != c.fiber_dim())
        throw std::invalid_argument("fiber_inverse: vector dimension mismatch");
    if (t == 0.0) {
        if (residual_out) *residual_out = 0.0;
        return eta;
    }
    BasePoint w_t = c.driving().evolve(t, w);
    double scale = std::max(1.0, vector_norm(eta, c.norm_kind()));
    double in_fiber = vector_norm(Vec(c.proj_P(w_t) * eta), c.norm_kind());
    if (in_fiber > tol * scale)
        throw std::domain_error("fiber_inverse: eta is not in ker P at the arrival fiber (residual " +
                                std::to_string(in_fiber) + ")");
    RestrictedSolve rs = solve_restricted(c, t, w, eta);
    if (!(rs.sigma_min > 0.0) || !std::isfinite(rs.residual))
        throw std::runtime_error("fiber_inverse: restricted map is numerically singular");
    if (rs.residual > tol * scale)
        throw std::runtime_error("fiber_inverse: least-squares residual " + std::to_string(rs.residual) +
                                 " exceeds tolerance; eta has no kernel preimage");
    if (residual_out) *residual_out = rs.residual;
    return rs.v;
}

Mat fiber_inverse_times_Q(const SplitCocycle& c, double t, const BasePoint& w, double tol) {
    const int d = c.fiber_dim();
    BasePoint w_t = c.driving().evolve(t, w);
    Mat q_arr = c.proj_Q(w_t);
    Mat out(d, d);
    for (int j = 0; j < d; ++j)
        out.col(j) = fiber_inverse(c, t, w, Vec(q_arr.col(j)), tol);
    return out;
}

SplittingReport verify_splitting(const SplitCocycle& c,
                                 const std::vector<double>& sample_times,
                                 const std::vector<BasePoint>& sample_points,
                                 double tol) {
    if (sample_times.empty() || sample_points.empty())
        throw std::invalid_argument("verify_splitting: empty sample grid");
    const int d = c.fiber_dim();
    const NormKind nk = c.norm_kind();
    SplittingReport rep;
    rep.tol = tol;
    rep.invertibility_margin = std::numeric_limits<double>::infinity();

    for (const BasePoint& w : sample_points) {
        Mat p = c.proj_P(w);
        rep.idempotence_residual = std::max(rep.idempotence_residual, operator_norm(Mat(p * p - p), nk));
        rep.identity_residual = std::max(rep.identity_residual,
                                         operator_norm(Mat(c.phi(0.0, w) - Mat::Identity(d, d)), nk));
    }
    // the frame-based conditions presuppose an actual projection
    const bool have_projection = rep.idempotence_residual <= std::max(tol, 1e-8);
    for (const BasePoint& w : sample_points) {
        Mat p = c.proj_P(w);
        FiberFrame fr;
        if (have_projection) fr = c.frame(w);
        for (double t : sample_times) {
            if (t < 0.0) continue;
            Mat phi_t = c.phi(t, w);
            BasePoint w_t = c.driving().evolve(t, w);
            Mat p_t = c.proj_P(w_t);
            rep.equivariance_residual = std::max(rep.equivariance_residual,
                                                 operator_norm(Mat(p_t * phi_t - phi_t * p), nk));
            if (have_projection && fr.basis_F.cols() > 0) {
                // Phi^t(ker P_w) must land in ker P_{theta^t w}
                Mat mapped = phi_t * fr.basis_F;
                rep.kernel_residual = std::max(rep.kernel_residual,
                                               (p_t * mapped).cwiseAbs().maxCoeff());
                FiberFrame fr_t = c.frame(w_t);
                Mat restricted = fr_t.basis_F.transpose() * mapped;
                Eigen::JacobiSVD<Mat> svd(restricted);
                rep.invertibility_margin = std::min(rep.invertibility_margin,
                                                    svd.singularValues()(restricted.cols() - 1));
            }
            for (double s : sample_times) {
                if (s < 0.0) continue;
                Mat direct = c.phi(t + s, w);
                Mat chained = c.phi(t, c.driving().evolve(s, w)) * c.phi(s, w);
                rep.cocycle_residual = std::max(rep.cocycle_residual, operator_norm(Mat(direct - chained), nk));
            }
        }
    }

    rep.pass = true;
    auto check = [&](double value, const char* name) {
        if (value > tol) {
            rep.pass = false;
            if (rep.worst_condition.empty()) rep.worst_condition = name;
        }
    };
    check(rep.identity_residual, "identity");
    check(rep.idempotence_residual, "idempotence");
    check(rep.equivariance_residual, "equivariance");
    check(rep.cocycle_residual, "cocycle_law");
    check(rep.kernel_residual, "kernel_mapping");
    if (!(rep.invertibility_margin > tol)) {
        rep.pass = false;
        if (rep.worst_condition.empty()) rep.worst_condition = "invertibility";
    }
    return rep;
}

DichotomyReport verify_dichotomy(const SplitCocycle& c, const DichotomyBounds& bounds,
                                 const std::vector<double>& sample_times,
                                 const std::vector<BasePoint>& sample_points,
                                 double tol) {
    DichotomyReport rep;
    rep.tol = tol;
    rep.worst_slack_d1 = std::numeric_limits<double>::infinity();
    rep.worst_slack_d2 = std::numeric_limits<double>::infinity();
    const NormKind nk = c.norm_kind();

    for (const BasePoint& w : sample_points) {
        Mat p = c.proj_P(w);
        for (double t : sample_times) {
            if (t < 0.0) continue;
            double measured1 = operator_norm(Mat(c.phi(t, w) * p), nk);
            double bound1 = bounds.alpha_plus(t, w);
            double slack1 = (bound1 - measured1) / bound1;
            if (slack1 < rep.worst_slack_d1) {
                rep.worst_slack_d1 = slack1;
                rep.witness_t_d1 = t;
                rep.witness_w_d1 = w;
            }
            double measured2 = operator_norm(fiber_inverse_times_Q(c, t, w), nk);
            double bound2 = bounds.alpha_minus(t, w);
            double slack2 = (bound2 - measured2) / bound2;
            if (slack2 < rep.worst_slack_d2) {
                rep.worst_slack_d2 = slack2;
                rep.witness_t_d2 = t;
                rep.witness_w_d2 = w;
            }
            ++rep.samples;
        }
    }
    rep.pass = rep.worst_slack_d1 >= -tol && rep.worst_slack_d2 >= -tol;
    return rep;
}

DecayReport check_decay_condition(const SplitCocycle& c, const DichotomyBounds& bounds,
                                  const BasePoint& w, double horizon, double tol) {
    DecayReport rep;
    rep.tol = tol;
    const bool discrete = c.driving().time_domain() == TimeDomain::Discrete;
    int n_samples;
    double step;
    if (discrete) {
        if (horizon < 20)
            throw std::invalid_argument("check_decay_condition: horizon must cover at least 20 samples");
        n_samples = static_cast<int>(std::floor(horizon));
        step = 1.0;
    } else {
        n_samples = 40;
        step = horizon / n_samples;
        if (!(step > 0.0))
            throw std::invalid_argument("check_decay_condition: horizon must be positive");
    }
    for (int i = 0; i <= n_samples; ++i) {
        double t = i * step;
        rep.times.push_back(t);
        rep.products.push_back(bounds.alpha_plus(t, w) * bounds.alpha_minus(t, w));
    }
    rep.final_value = rep.products.back();

    std::size_t half = rep.products.size() / 2;
    bool non_increasing = true;
    for (std::size_t i = half; i + 1 < rep.products.size(); ++i)
        if (rep.products[i + 1] > rep.products[i] * (1.0 + 1e-12)) non_increasing = false;
    rep.eventually_decreasing = non_increasing && rep.final_value < rep.products[half];
    rep.pass = rep.eventually_decreasing && rep.final_value <= tol;
    return rep;
}

SplitCocycle split_factor_cocycle(ScalarField K, FactorMap phi, FactorMap psi,
                              DrivingPtr driving, NormKind norm) {
    if (!driving)
        throw std::invalid_argument("split_factor_cocycle: missing driving system");

    auto proj = [K](const BasePoint& w) {
        double k = K(w);
        Mat p(2, 2);
        p << 1.0, k - 1.0,
             0.0, 0.0;
        return p;
    };
    auto phi_mat = [K, phi, psi, driving, proj](double t, const BasePoint& w) {
        BasePoint w_t = driving->evolve(t, w);
        double k_t = K(w_t);
        Mat q_t(2, 2);
        q_t << 0.0, 1.0 - k_t,
               0.0, 1.0;
        return Mat(phi(t, w) * proj(w) + (K(w) / k_t) * (1.0 / psi(t, w)) * q_t);
    };

    // Spot-check the factor law and K >= 1 before handing out the cocycle.
    std::vector<double> ts = driving->time_domain() == TimeDomain::Discrete
                                 ? std::vector<double>{0.0, 1.0, 2.0, 3.0}
                                 : std::vector<double>{0.0, 0.5, 1.0, 1.7};
    for (const BasePoint& w : driving->sample_points(4)) {
        if (K(w) < 1.0 - 1e-12)
            throw std::invalid_argument("split_factor_cocycle: K(w) < 1 at sample " + format_point(w));
        for (double t : ts) {
            for (double s : ts) {
                BasePoint w_s = driving->evolve(s, w);
                for (const FactorMap* f : {&phi, &psi}) {
                    double lhs = (*f)(t + s, w);
                    double rhs = (*f)(t, w_s) * (*f)(s, w);
                    if (!(lhs > 0.0) || std::abs(lhs - rhs) > 1e-9 * std::max(1.0, std::abs(lhs)))
                        throw std::invalid_argument("split_factor_cocycle: factor law fails at t=" +
                                                    std::to_string(t) + ", s=" + std::to_string(s) +
                                                    ", w=" + format_point(w));
                }
            }
        }
    }

    return SplitCocycle(2, driving, phi_mat, proj, norm);
}

double birkhoff_sum(const ScalarField& Z, double n, const BasePoint& w, const DrivingSystem& ds) {
    if (!is_integer_time(n) || n < 0.0)
        throw std::invalid_argument("birkhoff_sum: n must be a nonnegative integer");
    double sum = 0.0;
    BasePoint cur = w;
    for (long r = 0; r < static_cast<long>(n); ++r) {
        sum += Z(cur);
        cur = ds.evolve(1.0, cur);
    }
    return sum;
}

} // namespace perron
