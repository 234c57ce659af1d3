#include <doctest.h>

#include "perron/config.hpp"
#include "perron/solver.hpp"

#include <cmath>
#include <random>

using namespace perron;

namespace {

Scenario toy_scenario() { return build_scenario(preset_config("toy-pseudo-hyperbolic")); }

SigmaTau scenario_sigma_tau(const Scenario& sc) {
    const bool discrete = sc.driving->time_domain() == TimeDomain::Discrete;
    double dt = sc.solver.time_step;
    SigmaTau s = compute_sigma(*sc.bounds, *sc.perturbation, sc.anchor,
                               discrete ? sc.solver.time_points : sc.solver.time_points * dt, dt);
    SigmaTau t = compute_tau(*sc.bounds, *sc.perturbation, sc.anchor,
                             discrete ? sc.solver.l_truncation : sc.solver.l_truncation * dt, dt);
    return merge_sigma_tau(s, t);
}

} // namespace

TEST_CASE("solve_MN recovers M and N from sigma and tau") {
    MNConstants mn = solve_MN(0.2, 0.2);
    CHECK(mn.M == doctest::Approx((5.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-14));
    CHECK(mn.N == doctest::Approx(0.381966011).epsilon(1e-8));
    CHECK(mn.sigma_residual <= 1e-12);
    CHECK(mn.tau_residual <= 1e-12);

    MNConstants degenerate = solve_MN(0.25, 0.0);
    CHECK(degenerate.M == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(degenerate.N == 0.0);

    MNConstants mn2 = solve_MN(0.1, 0.3);
    CHECK(mn2.M == doctest::Approx(1.18350).epsilon(1e-5));
    CHECK(mn2.N == doctest::Approx(0.55051).epsilon(1e-4));

    MNConstants zero = solve_MN(0.0, 0.0);
    CHECK(zero.M == 1.0);
    CHECK(zero.N == 0.0);
    CHECK(zero.C == 1.0);
    CHECK(zero.q == 0.0);

    CHECK_THROWS_AS(solve_MN(0.3, 0.2), AdmissibilityError);
    CHECK_THROWS_AS(solve_MN(-0.1, 0.2), std::invalid_argument);
}

TEST_CASE("xi grid interpolation is exact on linear data and clamps outside") {
    XiGrid grid(2, 1.0, 5);
    CHECK(grid.total_points() == 25);
    CHECK(grid.spacing() == doctest::Approx(0.5));
    CHECK(grid.point(grid.zero_index()).lpNorm<Eigen::Infinity>() == 0.0);

    // values of the linear map (x, y) -> (2x - y)
    Mat vals(25, 1);
    for (int g = 0; g < 25; ++g) {
        Vec p = grid.point(g);
        vals(g, 0) = 2.0 * p[0] - p[1];
    }
    long clamps = 0;
    Vec q(2);
    q << 0.3, -0.7;
    CHECK(grid.interpolate(vals, q, &clamps)(0) == doctest::Approx(2.0 * 0.3 + 0.7).epsilon(1e-14));
    CHECK(clamps == 0);
    q << 1.4, 0.0; // outside: clamped to x = 1
    CHECK(grid.interpolate(vals, q, &clamps)(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(clamps == 1);

    CHECK_THROWS_AS(XiGrid(1, 1.0, 4), std::invalid_argument); // even count has no 0 node
}

TEST_CASE("metrics on tabulated families") {
    Scenario sc = toy_scenario();
    sc.solver.k_max = 4;
    sc.solver.time_points = 5;
    sc.solver.l_truncation = 5;
    sc.solver.xi_points = 9;
    SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    LpState st = initial_state(ctx);

    CHECK(metric_d1(ctx, st.h, st.h) == 0.0);
    CHECK(metric_d2(ctx, st.phi, st.phi) == 0.0);

    // one shifted entry of weighted size 0.1 is the sup
    auto hb = st.h;
    int j = 2, i = 3, g = 1;
    double alpha = ctx.alpha_plus_weight(i, j);
    double xi_norm = ctx.xi_norm(j, g);
    hb[j][i](g, 0) += 0.1 * alpha * xi_norm;
    CHECK(metric_d1(ctx, st.h, hb) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(metric_d1(ctx, hb, st.h) == doctest::Approx(0.1).epsilon(1e-12));

    auto pb = st.phi;
    pb[1](g, 0) += 0.1 * ctx.xi_norm(1, g);
    CHECK(metric_d2(ctx, st.phi, pb) == doctest::Approx(0.1).epsilon(1e-12));

    // random tables: symmetry
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    auto ha = st.h;
    for (auto& fiber : ha)
        for (auto& table : fiber)
            for (int r = 0; r < table.rows(); ++r) table(r, 0) += u(rng);
    CHECK(metric_d1(ctx, ha, hb) == doctest::Approx(metric_d1(ctx, hb, ha)).epsilon(1e-15));
}

TEST_CASE("apply_J: zero perturbation reproduces the linear flow") {
    Scenario sc = toy_scenario();
    sc.solver.k_max = 4;
    sc.solver.time_points = 6;
    sc.solver.l_truncation = 6;
    sc.solver.xi_points = 9;
    Perturbation zero = Perturbation::zero(2);
    SolverContext ctx(*sc.cocycle, *sc.bounds, zero, sc.anchor, sc.solver);
    LpState st = initial_state(ctx);
    ApplyStats stats;
    auto h1 = apply_J(ctx, st, stats);
    CHECK(metric_d1(ctx, h1, st.h) == 0.0);
    auto p1 = apply_L(ctx, st, stats);
    CHECK(metric_d2(ctx, p1, st.phi) == 0.0);
    CHECK(stats.clamp_count == 0);

    // h_{n}(xi) = Phi^n xi: diagonal toy contracts by e^{-0.5} per step
    for (int g = 0; g < ctx.grid().total_points(); ++g) {
        double xi = ctx.grid().point(g)(0);
        CHECK(h1[0][4](g, 0) == doctest::Approx(std::exp(-2.0) * xi).epsilon(1e-12));
    }
    // t = 0 row is the identity, exactly
    for (int g = 0; g < ctx.grid().total_points(); ++g)
        CHECK(h1[0][0](g, 0) == ctx.grid().point(g)(0));
}

TEST_CASE("apply_J: one-step value expands by hand") {
    Scenario sc = toy_scenario();
    sc.solver.k_max = 3;
    sc.solver.time_points = 4;
    sc.solver.l_truncation = 4;
    sc.solver.xi_points = 11;
    SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    LpState st = initial_state(ctx);
    ApplyStats stats;
    auto h1 = apply_J(ctx, st, stats);
    // J(h,phi)_{1,w}(xi) = e^{-0.5} xi + P f_w(xi, phi_w(xi)); phi^0 = 0,
    // f = eps (sin(x1+x2)/2, sin(x1)/2), so the E-component adds eps sin(xi)/2
    double eps = sc.perturbation->lip(sc.anchor);
    for (int g = 0; g < ctx.grid().total_points(); ++g) {
        double xi = ctx.grid().point(g)(0);
        double expected = std::exp(-0.5) * xi + eps * 0.5 * std::sin(xi);
        CHECK(h1[0][1](g, 0) == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("apply_L: series collapses when only the first fiber perturbs") {
    Scenario sc = toy_scenario();
    sc.solver.k_max = 3;
    sc.solver.time_points = 6;
    sc.solver.l_truncation = 6;
    sc.solver.xi_points = 11;
    double eps = 0.05;
    Perturbation first_only = Perturbation::sine2d(
        [eps](const BasePoint& w) { return w.coords[0] == 0.0 ? eps : 0.0; });
    SolverContext ctx(*sc.cocycle, *sc.bounds, first_only, sc.anchor, sc.solver);
    LpState st = initial_state(ctx);
    ApplyStats stats;
    auto phi1 = apply_L(ctx, st, stats);
    // phi_w0(xi) = -Phi^{-1} Q f(xi, 0): F-component is -e^{-0.4} eps sin(xi)/2
    const Mat& lift = ctx.frame(0).basis_F;
    for (int g = 0; g < ctx.grid().total_points(); ++g) {
        double xi = ctx.grid().point(g)(0);
        Vec ambient = lift * phi1[0].row(g).transpose();
        CHECK(ambient(1) == doctest::Approx(-std::exp(-0.4) * eps * 0.5 * std::sin(xi)).epsilon(1e-13));
    }
    // fibers past the perturbed one see a zero series
    for (int g = 0; g < ctx.grid().total_points(); ++g)
        CHECK(phi1[1].row(g).norm() == 0.0);
}

TEST_CASE("apply_L respects the graph tail bound on the toy") {
    Scenario sc = toy_scenario();
    sc.solver.xi_points = 21;
    sc.solver.k_max = 10;
    sc.solver.time_points = 40;
    sc.solver.l_truncation = 40;
    SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    SigmaTau st_pair = scenario_sigma_tau(sc);
    MNConstants mn = solve_MN(st_pair.sigma, st_pair.tau);

    LpState st = initial_state(ctx);
    ApplyStats stats;
    auto phi1 = apply_L(ctx, st, stats);
    // ||L(h,phi)_w(xi)|| <= M(1+N) tau ||xi||
    double bound = mn.C * (st_pair.tau + st_pair.tau_tail_bound);
    for (int g = 0; g < ctx.grid().total_points(); ++g) {
        if (g == ctx.grid().zero_index()) continue;
        Vec ambient = ctx.frame(0).basis_F * phi1[0].row(g).transpose();
        CHECK(ambient.lpNorm<Eigen::Infinity>() <= bound * ctx.xi_norm(0, g) * (1.0 + 1e-9));
    }
}

TEST_CASE("iterate_T on the toy preset: contraction certified") {
    Scenario sc = toy_scenario();
    SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    SigmaTau st = scenario_sigma_tau(sc);
    REQUIRE(st.admissible());

    SolveResult res = iterate_T(ctx, st);
    CHECK(res.converged);
    CHECK(res.final_step <= sc.solver.stop_tol);
    for (double r : res.ratios) CHECK(r <= res.mn.q * (1.0 + 1e-6) + 1e-12);

    // Banach a-priori bound on the iterate count
    double d0 = res.d_steps.front();
    double q = res.mn.q;
    int bound = static_cast<int>(std::ceil(std::log(sc.solver.stop_tol * (1.0 - q) / d0) / std::log(q))) + 1;
    CHECK(res.iterations <= bound);

    // structural invariants of the tables
    const int zero = res.phi.grid.zero_index();
    for (const Mat& vals : res.phi.values) CHECK(vals.row(zero).norm() == 0.0);
    for (const auto& fiber : res.h.values) {
        for (int g = 0; g < res.h.grid.total_points(); ++g)
            CHECK(fiber[0](g, 0) == res.h.grid.point(g)(0)); // h_0 = xi exactly
        CHECK(fiber[0](zero, 0) == 0.0);
    }
    CHECK(res.membership_excess_h <= 1e-9);
    CHECK(res.membership_excess_phi <= 1e-9);
    CHECK(res.clamp_count == 0);
    CHECK_FALSE(res.degraded);
    CHECK(res.fixed_point_residual_d1 + res.fixed_point_residual_d2 <= sc.solver.stop_tol);
    // finite-horizon equivalence of the h and phi tables
    CHECK(res.equivalence_residual <= res.budget_total());
}

TEST_CASE("iterate_T at a tight stop tolerance stays within the a-priori bound") {
    Scenario sc = toy_scenario();
    sc.solver.stop_tol = 1e-10;
    SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    SigmaTau st = scenario_sigma_tau(sc);
    SolveResult res = iterate_T(ctx, st);
    CHECK(res.converged);
    double q = res.mn.q;
    int bound = static_cast<int>(std::ceil(std::log(sc.solver.stop_tol * (1.0 - q) / res.d_steps.front()) /
                                           std::log(q))) + 1;
    CHECK(res.iterations <= bound);
}

TEST_CASE("iterate_T zero perturbation: one step, exact fixed point") {
    Scenario sc = toy_scenario();
    sc.perturbation = std::make_shared<Perturbation>(Perturbation::zero(2));
    SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    SigmaTau st = scenario_sigma_tau(sc);
    CHECK(st.sigma == 0.0);
    CHECK(st.tau == 0.0);

    SolveResult res = iterate_T(ctx, st);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    CHECK(res.final_step == 0.0);
    for (const Mat& vals : res.phi.values) CHECK(vals.cwiseAbs().maxCoeff() == 0.0);
    // h_{n,w}(xi) = Phi^n xi to 1e-12
    for (int g = 0; g < ctx.grid().total_points(); ++g) {
        double xi = ctx.grid().point(g)(0);
        CHECK(std::abs(res.h.values[0][40](g, 0) - std::exp(-20.0) * xi) <= 1e-12);
    }
}

TEST_CASE("iterate_T rejects inadmissible inputs") {
    Scenario sc = toy_scenario();
    SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    SigmaTau bad;
    bad.sigma = 0.4;
    bad.tau = 0.2;
    CHECK_THROWS_AS(iterate_T(ctx, bad), AdmissibilityError);
}

TEST_CASE("solver context validates its grids") {
    Scenario sc = toy_scenario();
    sc.solver.time_points = 10;
    sc.solver.l_truncation = 20; // L consumes h beyond the h table
    CHECK_THROWS_AS(SolverContext(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver),
                    std::invalid_argument);
}

TEST_CASE("solver context rejects perturbations that move the origin") {
    Scenario sc = toy_scenario();
    Perturbation bad(
        [](const BasePoint&, const Vec& x) {
            Vec y = 0.01 * x;
            y[0] += 1e-6;
            return y;
        },
        [](const BasePoint&) { return 0.01; });
    CHECK_THROWS_AS(SolverContext(*sc.cocycle, *sc.bounds, bad, sc.anchor, sc.solver),
                    std::invalid_argument);
}

TEST_CASE("continuous-time solve converges with certified ratios") {
    Scenario sc = build_scenario(preset_config("tempered-exp"));
    sc.solver.k_max = 10;
    sc.solver.time_points = 30;
    sc.solver.l_truncation = 30;
    sc.solver.xi_points = 11;
    SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    SigmaTau st = scenario_sigma_tau(sc);
    REQUIRE(st.admissible());
    SolveResult res = iterate_T(ctx, st);
    CHECK(res.converged);
    for (double r : res.ratios) CHECK(r <= res.mn.q * (1.0 + 1e-6) + 1e-12);
    CHECK(res.membership_excess_h <= 1e-6);
    CHECK(res.membership_excess_phi <= 1e-6);
    CHECK(res.equivalence_residual <= res.budget_total());
}

TEST_CASE("linear perturbation matches the backward graph-slope oracle") {
    // With f_{theta^k w}(x) = s_k B x the perturbed one-step maps are the
    // matrices A_k = Phi^1 + s_k B and the invariant graph is linear,
    // phi_k(xi) = l_k xi.  The slopes satisfy the exact backward recursion
    //   l_k = (l_{k+1} a11 - a21) / (a22 - l_{k+1} a12)
    // which needs no grids at all -- an independent route to the same
    // object.  Interpolation is exact on linear data, so the tables must
    // agree to solver tolerance.
    const double ce = std::exp(-0.5), cf = std::exp(0.4), eps = 0.05;
    Mat b(2, 2);
    b << 0.3, 0.1,
         0.2, -0.25;
    auto scale = [eps](const BasePoint& w) { return eps * std::pow(2.0, -std::abs(w.coords[0])); };
    Perturbation linf(
        [b, scale](const BasePoint& w, const Vec& x) { return Vec(scale(w) * (b * x)); },
        [b, scale](const BasePoint& w) {
            return scale(w) * b.cwiseAbs().rowwise().sum().maxCoeff();
        });

    Scenario sc = toy_scenario();
    sc.solver.k_max = 12;
    sc.solver.time_points = 30;
    sc.solver.l_truncation = 30;
    sc.solver.xi_points = 11;
    sc.solver.stop_tol = 1e-10;
    SolverContext ctx(*sc.cocycle, *sc.bounds, linf, sc.anchor, sc.solver);
    SigmaTau st = merge_sigma_tau(compute_sigma(*sc.bounds, linf, sc.anchor, 30.0),
                                  compute_tau(*sc.bounds, linf, sc.anchor, 30.0));
    REQUIRE(st.admissible());
    SolveResult res = iterate_T(ctx, st);
    REQUIRE(res.converged);

    // backward slope recursion seeded far beyond the solver window
    const int far = 120;
    std::vector<double> slope(static_cast<std::size_t>(far) + 1, 0.0);
    for (int k = far - 1; k >= 0; --k) {
        double sk = eps * std::pow(2.0, -k);
        double a11 = ce + sk * b(0, 0), a12 = sk * b(0, 1);
        double a21 = sk * b(1, 0), a22 = cf + sk * b(1, 1);
        slope[static_cast<std::size_t>(k)] =
            (slope[static_cast<std::size_t>(k) + 1] * a11 - a21) /
            (a22 - slope[static_cast<std::size_t>(k) + 1] * a12);
    }

    double worst_phi = 0.0;
    for (int j = 0; j <= sc.solver.k_max; ++j) {
        const Mat& lift_f = ctx.frame(j).basis_F;
        const Mat& lift_e = ctx.frame(j).basis_E;
        for (int g = 0; g < ctx.grid().total_points(); ++g) {
            if (g == ctx.grid().zero_index()) continue;
            double xi_amb = (lift_e * ctx.grid().point(g))(0);
            double phi_amb = (lift_f * res.phi.values[static_cast<std::size_t>(j)].row(g).transpose())(1);
            worst_phi = std::max(worst_phi,
                                 std::abs(phi_amb - slope[static_cast<std::size_t>(j)] * xi_amb) /
                                     std::abs(xi_amb));
        }
    }
    CHECK(worst_phi <= 1e-8);

    // trajectories inside the manifold follow p_{n+1} = (a11 + a12 l) p_n
    double worst_h = 0.0;
    for (int j = 0; j <= sc.solver.k_max; ++j) {
        for (int g = 0; g < ctx.grid().total_points(); ++g) {
            if (g == ctx.grid().zero_index()) continue;
            double p = (ctx.frame(j).basis_E * ctx.grid().point(g))(0);
            for (int n = 0; n < 10; ++n) {
                int k = j + n;
                double sk = eps * std::pow(2.0, -k);
                double a11 = ce + sk * b(0, 0), a12 = sk * b(0, 1);
                p = (a11 + a12 * slope[static_cast<std::size_t>(k)]) * p;
                double h_amb = (ctx.frame(j + n + 1).basis_E *
                                res.h.values[static_cast<std::size_t>(j)][static_cast<std::size_t>(n) + 1]
                                    .row(g)
                                    .transpose())(0);
                worst_h = std::max(worst_h, std::abs(h_amb - p));
            }
        }
    }
    CHECK(worst_h <= 1e-8);
}

TEST_CASE("scalar fiber (F = {0}) solves through the whole pipeline") {
    auto ds = DrivingSystem::integer_shift();
    auto phi_m = [](double t, const BasePoint&) {
        Mat m(1, 1);
        m << std::exp(-0.3 * t);
        return m;
    };
    auto proj = [](const BasePoint&) { return Mat::Identity(1, 1); };
    SplitCocycle c(1, ds, phi_m, proj);
    auto bounds = DichotomyBounds::tempered_exp(
        ds, [](const BasePoint&) { return 1.0; }, [](const BasePoint&) { return -0.3; },
        [](const BasePoint&) { return -0.4; });
    Perturbation pert(
        [](const BasePoint& w, const Vec& x) {
            double s = 0.05 * std::pow(2.0, -std::abs(w.coords[0]));
            return Vec(s * x.array().sin().matrix());
        },
        [](const BasePoint& w) { return 0.05 * std::pow(2.0, -std::abs(w.coords[0])); });

    SolverOptions opt;
    opt.k_max = 8;
    opt.time_points = 12;
    opt.l_truncation = 12;
    opt.xi_points = 11;
    SolverContext ctx(c, bounds, pert, BasePoint{0.0}, opt);
    CHECK(ctx.dim_E() == 1);
    CHECK(ctx.dim_F() == 0);

    SigmaTau s = compute_sigma(bounds, pert, BasePoint{0.0}, 12.0);
    SigmaTau t = compute_tau(bounds, pert, BasePoint{0.0}, 12.0);
    SigmaTau st = merge_sigma_tau(s, t);
    REQUIRE(st.admissible());
    SolveResult res = iterate_T(ctx, st);
    CHECK(res.converged);
    CHECK(res.equivalence_residual == 0.0); // no graph directions at all
    for (const Mat& vals : res.phi.values) CHECK(vals.cols() == 0);
}

TEST_CASE("full pipeline on a 3-D fiber with a rank-2 oblique projection") {
    auto ds = DrivingSystem::integer_shift();
    Mat p(3, 3);
    p << 1.0, 0.0, 0.3,
         0.0, 1.0, -0.2,
         0.0, 0.0, 0.0; // idempotent, rank 2, not orthogonal
    Mat q = Mat::Identity(3, 3) - p;
    const double ce = std::exp(-0.5), cf = std::exp(0.4);
    auto phi_m = [p, q, ce, cf](double t, const BasePoint&) {
        return Mat(std::pow(ce, t) * p + std::pow(cf, t) * q);
    };
    SplitCocycle c(3, ds, phi_m, [p](const BasePoint&) { return p; });

    auto rep = verify_splitting(c, {0.0, 1.0, 2.0, 4.0}, ds->sample_points(3), 1e-12);
    REQUIRE(rep.pass);

    // ||Phi^n P|| = ce^n ||P|| = 1.3 ce^n and the backward norm is cf^{-n} ||Q|| = cf^{-n}
    auto bounds = DichotomyBounds::tempered_exp(
        ds, [](const BasePoint&) { return 1.3; }, [](const BasePoint&) { return -0.5; },
        [](const BasePoint&) { return -0.4; });
    auto dich = verify_dichotomy(c, bounds, {0.0, 1.0, 3.0}, {BasePoint{0.0}}, 1e-9);
    REQUIRE(dich.pass);

    Perturbation pert(
        [](const BasePoint& w, const Vec& x) {
            double s = 0.04 * std::pow(2.0, -std::abs(w.coords[0]));
            Vec y(3);
            y[0] = s * 0.5 * std::sin(x[0] + x[2]);
            y[1] = s * 0.5 * std::sin(x[1]);
            y[2] = s * 0.5 * std::sin(x[0] - x[1]);
            return y;
        },
        [](const BasePoint& w) { return 0.04 * std::pow(2.0, -std::abs(w.coords[0])); });

    SolverOptions opt;
    opt.k_max = 8;
    opt.time_points = 16;
    opt.l_truncation = 16;
    opt.xi_points = 9;
    opt.stop_tol = 1e-9;
    SolverContext ctx(c, bounds, pert, BasePoint{0.0}, opt);
    REQUIRE(ctx.dim_E() == 2);
    REQUIRE(ctx.dim_F() == 1);

    SigmaTau st = merge_sigma_tau(compute_sigma(bounds, pert, BasePoint{0.0}, 16.0),
                                  compute_tau(bounds, pert, BasePoint{0.0}, 16.0));
    REQUIRE(st.admissible());
    SolveResult res = iterate_T(ctx, st);
    CHECK(res.converged);
    for (double r : res.ratios) CHECK(r <= res.mn.q * (1.0 + 1e-6) + 1e-12);
    CHECK(res.membership_excess_h <= 1e-9);
    CHECK(res.membership_excess_phi <= 1e-9);
    CHECK(res.equivalence_residual <= res.budget_total());
    CHECK(res.clamp_count == 0);

    // invariance along the graph, bounded forward window
    std::vector<InvarianceSample> samples;
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int i = 0; i < 60; ++i) {
        InvarianceSample s;
        s.fiber = i % 4;
        s.t = 1 + (i % 3);
        s.xi = Vec(2);
        s.xi << u(rng), u(rng);
        if (s.xi.lpNorm<Eigen::Infinity>() < 0.2) s.xi[0] += 0.5;
        samples.push_back(s);
    }
    InvarianceReport inv = check_invariance(c, pert, res.phi, samples, res.budget_total());
    CHECK(inv.pass);
}

TEST_CASE("interior fibers are insensitive to the window size") {
    // reads past the tabulated window evaluate the zero graph; their
    // influence on interior fibers is bounded by the decaying tail terms,
    // so enlarging k_max must not move the interior tables
    auto solve_with_kmax = [](int k_max) {
        Scenario sc = toy_scenario();
        sc.solver.k_max = k_max;
        sc.solver.time_points = 20;
        sc.solver.l_truncation = 20;
        sc.solver.xi_points = 11;
        SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
        SigmaTau st = scenario_sigma_tau(sc);
        return iterate_T(ctx, st);
    };
    SolveResult small = solve_with_kmax(6);
    SolveResult large = solve_with_kmax(12);
    for (int j = 0; j <= 6; ++j) {
        double dphi = (small.phi.values[static_cast<std::size_t>(j)] -
                       large.phi.values[static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff();
        CHECK(dphi <= 1e-12);
        for (int i = 0; i <= 20; ++i) {
            double dh = (small.h.values[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] -
                         large.h.values[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
                            .cwiseAbs()
                            .maxCoeff();
            CHECK(dh <= 1e-12);
        }
    }
}

TEST_CASE("threaded sweeps match single-threaded results") {
    Scenario sc = toy_scenario();
    sc.solver.k_max = 8;
    sc.solver.time_points = 10;
    sc.solver.l_truncation = 10;
    sc.solver.xi_points = 11;
    SigmaTau st = scenario_sigma_tau(sc);

    SolverContext ctx1(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    SolveResult r1 = iterate_T(ctx1, st);
    sc.solver.threads = 4;
    SolverContext ctx4(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    SolveResult r4 = iterate_T(ctx4, st);

    CHECK(r1.iterations == r4.iterations);
    CHECK(r1.final_step == r4.final_step);
    for (std::size_t j = 0; j < r1.phi.values.size(); ++j)
        CHECK((r1.phi.values[j] - r4.phi.values[j]).cwiseAbs().maxCoeff() == 0.0);
}
