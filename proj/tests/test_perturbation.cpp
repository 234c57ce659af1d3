#include <doctest.h>

#include "perron/corollaries.hpp"
#include "perron/config.hpp"

#include <cmath>
#include <random>

using namespace perron;

namespace {

// toy data: alpha^+_{n,.} = e^{-0.5 n}, alpha^-_{n,.} = e^{-0.4 n},
// Lip(f_{theta^k w0}) = eps 2^{-k}
struct Toy {
    DrivingPtr ds = DrivingSystem::integer_shift();
    double eps;
    DichotomyBounds bounds;
    Perturbation pert;

    explicit Toy(double eps_)
        : eps(eps_),
          bounds(DichotomyBounds::tempered_exp(
              ds, [](const BasePoint&) { return 1.0; }, [](const BasePoint&) { return -0.5; },
              [](const BasePoint&) { return -0.4; })),
          pert(Perturbation::sine2d(
              [eps_](const BasePoint& w) { return eps_ * std::pow(2.0, -std::abs(w.coords[0])); })) {}
};

// brute-force oracle for the discrete sigma sup
double sigma_oracle(double eps, int horizon) {
    double sup = 0.0;
    for (int n = 1; n <= horizon; ++n) {
        double total = 0.0;
        for (int k = 0; k < n; ++k)
            total += std::exp(-0.5 * (n - k - 1)) * (eps * std::pow(2.0, -k)) * std::exp(-0.5 * k);
        sup = std::max(sup, total / std::exp(-0.5 * n));
    }
    return sup;
}

// brute-force oracle for the truncated tau sum
double tau_oracle(double eps, int truncation) {
    double total = 0.0;
    for (int k = 0; k <= truncation; ++k)
        total += std::exp(-0.4 * (k + 1)) * (eps * std::pow(2.0, -k)) * std::exp(-0.5 * k);
    return total;
}

} // namespace

TEST_CASE("lip_scan audits the declared constant") {
    Perturbation zero = Perturbation::zero(2);
    std::vector<std::pair<Vec, Vec>> pairs;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 40; ++i) {
        Vec x(2), y(2);
        x << u(rng), u(rng);
        y << u(rng), u(rng);
        if ((x - y).lpNorm<Eigen::Infinity>() == 0.0) continue;
        pairs.emplace_back(x, y);
    }
    CHECK(lip_scan(zero, BasePoint{0.0}, pairs) == 0.0);

    double c = 0.7;
    Perturbation sine = Perturbation::sine2d([c](const BasePoint&) { return c; });
    double worst = lip_scan(sine, BasePoint{0.0}, pairs);
    CHECK(worst <= c * (1.0 + 1e-12));
    CHECK(worst > 0.1 * c);

    // declaring half the true constant gets flagged with a witness
    Perturbation lying(
        [c](const BasePoint&, const Vec& x) {
            Vec y(2);
            y[0] = c * 0.5 * std::sin(x[0] + x[1]);
            y[1] = c * 0.5 * std::sin(x[0]);
            return y;
        },
        [c](const BasePoint&) { return c / 2.0; });
    std::vector<std::pair<Vec, Vec>> tight;
    Vec a(2), b(2);
    a << 0.01, 0.01;
    b << -0.01, -0.01;
    tight.emplace_back(a, b);
    CHECK_THROWS_AS(lip_scan(lying, BasePoint{0.0}, tight), LipViolation);
    try {
        lip_scan(lying, BasePoint{0.0}, tight);
    } catch (const LipViolation& v) {
        CHECK(v.quotient > v.declared);
        CHECK(v.x.size() == 2);
    }
}

TEST_CASE("sigma on the toy matches the summation oracle") {
    Toy toy(0.05);
    SigmaTau st = compute_sigma(toy.bounds, toy.pert, BasePoint{0.0}, 40.0);
    CHECK(st.sigma == doctest::Approx(sigma_oracle(0.05, 40)).epsilon(1e-12));
    CHECK(st.sigma == doctest::Approx(0.16487).epsilon(1e-4));

    Perturbation zero = Perturbation::zero(2);
    CHECK(compute_sigma(toy.bounds, zero, BasePoint{0.0}, 40.0).sigma == 0.0);
}

TEST_CASE("tau on the toy matches the geometric-series oracle") {
    Toy toy(0.05);
    SigmaTau st = compute_tau(toy.bounds, toy.pert, BasePoint{0.0}, 40.0);
    CHECK(st.tau == doctest::Approx(tau_oracle(0.05, 40)).epsilon(1e-12));
    // full series: eps e^{-0.4}/(1 - e^{-0.9}/2)
    double full = 0.05 * std::exp(-0.4) / (1.0 - std::exp(-0.9) / 2.0);
    CHECK(st.tau + st.tau_tail_bound == doctest::Approx(full).epsilon(1e-9));
    CHECK(st.tau == doctest::Approx(0.04207).epsilon(1e-4));
    CHECK(st.tail_available);

    Perturbation zero = Perturbation::zero(2);
    SigmaTau zt = compute_tau(toy.bounds, zero, BasePoint{0.0}, 40.0);
    CHECK(zt.tau == 0.0);
    CHECK(zt.tau_tail_bound == 0.0);
    CHECK(zt.tail_available);
}

TEST_CASE("tau fails closed without decay") {
    auto ds = DrivingSystem::integer_shift();
    auto bounds = DichotomyBounds::tempered_exp(
        ds, [](const BasePoint&) { return 1.0; }, [](const BasePoint&) { return 0.5; },
        [](const BasePoint&) { return -0.4; });
    Perturbation pert = Perturbation::sine2d([](const BasePoint&) { return 0.05; });
    SigmaTau st = compute_tau(bounds, pert, BasePoint{0.0}, 40.0);
    CHECK_FALSE(st.tail_available);
    CHECK_FALSE(st.admissible());
}

TEST_CASE("sigma and tau are monotone in horizon and scale linearly") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ue(0.01, 0.2);
    for (int trial = 0; trial < 5; ++trial) {
        double eps = ue(rng);
        Toy toy(eps);
        BasePoint w0{0.0};
        double s20 = compute_sigma(toy.bounds, toy.pert, w0, 20.0).sigma;
        double s40 = compute_sigma(toy.bounds, toy.pert, w0, 40.0).sigma;
        CHECK(s40 >= s20);
        double t20 = compute_tau(toy.bounds, toy.pert, w0, 20.0).tau;
        double t40 = compute_tau(toy.bounds, toy.pert, w0, 40.0).tau;
        CHECK(t40 >= t20);

        Toy scaled(2.0 * eps);
        CHECK(compute_sigma(scaled.bounds, scaled.pert, w0, 40.0).sigma ==
              doctest::Approx(2.0 * s40).epsilon(1e-12));
        CHECK(compute_tau(scaled.bounds, scaled.pert, w0, 40.0).tau ==
              doctest::Approx(2.0 * t40).epsilon(1e-12));
    }
}

TEST_CASE("continuous sigma/tau via trapezoid") {
    auto ds = DrivingSystem::planar_shift_flow();
    // alpha^+ = e^{-0.6 t}, alpha^- = e^{-0.5 t}, Lip = c/(1+x^2):
    // sigma = sup_t int_0^t Lip(theta^s w) ds -> c * pi/2 from x = 0
    double c = 0.02;
    auto bounds = DichotomyBounds::tempered_exp(
        ds, [](const BasePoint&) { return 1.0; }, [](const BasePoint&) { return -0.6; },
        [](const BasePoint&) { return -0.5; });
    Perturbation pert = Perturbation::sine2d(
        [c](const BasePoint& w) { return c / (1.0 + w.coords[0] * w.coords[0]); });
    BasePoint w0{0.0, 0.0};
    SigmaTau s = compute_sigma(bounds, pert, w0, 30.0, 0.01);
    double expected = c * std::atan(30.0); // int_0^30 c/(1+s^2) ds
    CHECK(s.sigma == doctest::Approx(expected).epsilon(1e-4));

    SigmaTau t = compute_tau(bounds, pert, w0, 30.0, 0.01);
    // integrand c e^{-1.1 s}/(1+s^2); crude upper bound c/1.1
    CHECK(t.tau < c / 1.1 * 1.01);
    CHECK(t.tau > 0.0);
    CHECK(t.tail_available);

    // continuous calls require a quadrature step
    CHECK_THROWS_AS(compute_sigma(bounds, pert, w0, 30.0), std::invalid_argument);
}

TEST_CASE("temperedness lambda") {
    auto ds = DrivingSystem::planar_shift_flow();
    ScalarField one = [](const BasePoint&) { return 1.0; };
    TemperednessReport r1 = temperedness_lambda(one, 0.5, BasePoint{0.0, 0.0}, 40.0, *ds);
    CHECK(r1.lambda == doctest::Approx(1.0));
    CHECK_FALSE(r1.diverging);

    // polynomial K: e^{-gamma|t|} beats it, sampled max stabilizes
    ScalarField polyK = [](const BasePoint& w) {
        return 1.1 * std::pow(1.0 + w.coords[0] * w.coords[0], 0.3);
    };
    TemperednessReport r2 = temperedness_lambda(polyK, 0.5, BasePoint{0.0, 0.0}, 40.0, *ds);
    TemperednessReport r2b = temperedness_lambda(polyK, 0.5, BasePoint{0.0, 0.0}, 80.0, *ds);
    CHECK_FALSE(r2.diverging);
    CHECK(r2b.lambda == doctest::Approx(r2.lambda).epsilon(1e-9));
    CHECK(r2.lambda >= polyK(BasePoint{0.0, 0.0}));

    // K growing like e^{|t|} with gamma = 0.5 diverges
    ScalarField expK = [](const BasePoint& w) { return std::exp(std::abs(w.coords[0])); };
    TemperednessReport r3 = temperedness_lambda(expK, 0.5, BasePoint{0.0, 0.0}, 40.0, *ds);
    CHECK(r3.diverging);
    TemperednessReport r3b = temperedness_lambda(expK, 0.5, BasePoint{0.0, 0.0}, 80.0, *ds);
    CHECK(r3b.lambda > 2.0 * r3.lambda);
}

namespace {

CorollaryData c42_data(double delta, double gamma_val) {
    CorollaryData d;
    d.driving = DrivingSystem::integer_shift();
    d.K = [](const BasePoint&) { return 1.0; };
    d.a = [](const BasePoint&) { return -0.6; };
    d.b = [](const BasePoint&) { return -0.3; };
    d.gamma = [gamma_val](const BasePoint&) { return gamma_val; };
    d.G = [](const BasePoint& w) { return std::pow(2.0, -std::abs(w.coords[0])) / 3.0; };
    d.delta = delta;
    // Lip exactly at its ceiling: lambda = 1 for constant K = 1
    d.lip = [d](const BasePoint& w) {
        double aw = -0.6, bw = -0.3, gw = 0.1;
        return d.delta * std::min(std::exp(aw) * d.G(w),
                                  std::exp(bw) * (1.0 - std::exp(aw + bw + gw)));
    };
    return d;
}

std::vector<BasePoint> orbit_samples(const DrivingSystem& ds, const BasePoint& anchor, int n) {
    std::vector<BasePoint> out;
    for (int k = 0; k < n; ++k) out.push_back(ds.evolve(k, anchor));
    return out;
}

} // namespace

TEST_CASE("corollary c42: passing data, then single-hypothesis violations") {
    CorollaryData d = c42_data(0.2, 0.1);
    auto samples = orbit_samples(*d.driving, BasePoint{0.0}, 5);
    HypothesisReport rep = check_corollary(CorollaryKind::C42, d, samples);
    CHECK(rep.pass);

    // delta out of ]0, 1/4[
    CorollaryData bad_delta = c42_data(0.3, 0.1);
    HypothesisReport r1 = check_corollary(CorollaryKind::C42, bad_delta, samples);
    CHECK_FALSE(r1.pass);
    CHECK_FALSE(r1.checks[0].pass); // the delta-range check leads
    CHECK(r1.checks[0].name.find("delta") != std::string::npos);

    // sign flip of a+b
    CorollaryData bad_sign = c42_data(0.2, 0.1);
    bad_sign.a = [](const BasePoint&) { return 0.6; };
    HypothesisReport r2 = check_corollary(CorollaryKind::C42, bad_sign, samples);
    CHECK_FALSE(r2.pass);
    bool found = false;
    for (const auto& c : r2.checks)
        if (c.name == "a + b < 0") {
            found = true;
            CHECK_FALSE(c.pass);
            CHECK_FALSE(c.witness.empty());
        }
    CHECK(found);
}

TEST_CASE("c42 pass implies sigma and tau at most delta") {
    CorollaryData d = c42_data(0.2, 0.1);
    auto samples = orbit_samples(*d.driving, BasePoint{0.0}, 5);
    REQUIRE(check_corollary(CorollaryKind::C42, d, samples).pass);

    DichotomyBounds bounds = corollary_bounds(CorollaryKind::C42, d, 0.1);
    Perturbation pert = Perturbation::sine2d(d.lip);
    SigmaTau s = compute_sigma(bounds, pert, BasePoint{0.0}, 60.0);
    SigmaTau t = compute_tau(bounds, pert, BasePoint{0.0}, 60.0);
    CHECK(s.sigma <= d.delta + 1e-12);
    CHECK(t.tau + t.tau_tail_bound <= d.delta + 1e-9);
}

TEST_CASE("corollary c44: non-monotone H is located") {
    CorollaryData d;
    d.driving = DrivingSystem::integer_shift();
    d.K = [](const BasePoint&) { return 1.0; };
    // decreasing a b K along the orbit makes H decreasing
    d.a = [](const BasePoint& w) { return std::exp(-0.3 * w.coords[0]); };
    d.b = [](const BasePoint& w) { return std::exp(-0.2 * w.coords[0]); };
    d.G = [](const BasePoint& w) { return std::pow(2.0, -std::abs(w.coords[0])) / 3.0; };
    d.lip = [](const BasePoint&) { return 1e-4; };
    d.delta = 0.2;
    auto samples = orbit_samples(*d.driving, BasePoint{0.0}, 3);
    HypothesisReport rep = check_corollary(CorollaryKind::C44, d, samples);
    CHECK_FALSE(rep.pass);
    bool found = false;
    for (const auto& c : rep.checks)
        if (c.name.find("non-decreasing") != std::string::npos) {
            found = true;
            CHECK_FALSE(c.pass);
            CHECK_FALSE(c.witness.empty());
        }
    CHECK(found);
}

TEST_CASE("corollary c34: decreasing H fails the derivative-sign hypothesis") {
    CorollaryRun run = build_corollary(preset_corollary_config("c34"));
    // fields decaying along the flow turn H into a decreasing function
    run.data.a = [](const BasePoint& w) { return std::exp(-0.3 * w.coords[0]); };
    run.data.b = [](const BasePoint& w) { return std::exp(-0.2 * w.coords[0]); };
    HypothesisReport rep = check_corollary(run.kind, run.data, run.samples, run.horizons);
    CHECK_FALSE(rep.pass);
    bool found = false;
    for (const auto& c : rep.checks)
        if (c.name == "H_w'(s) > 0") {
            found = true;
            CHECK_FALSE(c.pass);
            CHECK(c.margin < 0.0);
            CHECK_FALSE(c.witness.empty());
        }
    CHECK(found);
}

TEST_CASE("built-in corollary datasets all pass their checkers") {
    for (const std::string id : {"c32", "c33", "c34", "c42", "c43", "c44"}) {
        CorollaryRun run = build_corollary(preset_corollary_config(id));
        HypothesisReport rep = check_corollary(run.kind, run.data, run.samples, run.horizons);
        INFO("corollary ", id);
        for (const auto& c : rep.checks) {
            INFO(c.name, " margin ", c.margin, " witness ", c.witness);
            CHECK(c.pass);
        }
        CHECK(rep.pass);
    }
}

TEST_CASE("c32-style data keeps sigma below delta (continuous)") {
    // Lip(f_w) <= delta K(w)^{-1} G(w) with the integral of G at most 1
    CorollaryRun run = build_corollary(preset_corollary_config("c32"));
    REQUIRE(check_corollary(run.kind, run.data, run.samples, run.horizons).pass);
    DichotomyBounds bounds = corollary_bounds(run.kind, run.data, 0.05);
    Perturbation pert = Perturbation::sine2d(run.data.lip);
    SigmaTau s = compute_sigma(bounds, pert, run.samples.front(), 40.0, 0.05);
    CHECK(s.sigma <= run.data.delta + 1e-9);
    SigmaTau t = compute_tau(bounds, pert, run.samples.front(), 40.0, 0.05);
    CHECK(t.tau + t.tau_tail_bound <= run.data.delta + 1e-6);
}

TEST_CASE("corollary input validation") {
    CorollaryData d = c42_data(0.2, 0.1);
    CHECK_THROWS_AS(check_corollary(CorollaryKind::C32, d,
                                    orbit_samples(*d.driving, BasePoint{0.0}, 3)),
                    std::invalid_argument); // continuous corollary on a discrete base
    CorollaryData missing = d;
    missing.gamma = nullptr;
    CHECK_THROWS_AS(check_corollary(CorollaryKind::C42, missing,
                                    orbit_samples(*d.driving, BasePoint{0.0}, 3)),
                    std::invalid_argument);
    CHECK_THROWS_AS(corollary_from_id("c99"), std::invalid_argument);
}
