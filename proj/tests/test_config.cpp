#include <doctest.h>

#include "perron/config.hpp"

#include <cmath>

using namespace perron;

TEST_CASE("field forms evaluate as documented") {
    CHECK(make_field({{"form", "const"}, {"value", 2.5}})(BasePoint{9.0}) == 2.5);
    CHECK(make_field({{"form", "geometric"}, {"scale", 0.05}, {"base", 0.5}})(BasePoint{3.0}) ==
          doctest::Approx(0.05 / 8.0));
    CHECK(make_field({{"form", "bump"}, {"scale", 0.3}})(BasePoint{2.0, 0.0}) == doctest::Approx(0.06));
    CHECK(make_field({{"form", "one_plus_gauss"}, {"amplitude", 0.5}})(BasePoint{0.0, 0.0}) == 1.5);
    CHECK(make_field({{"form", "exp_coord"}, {"rate", 0.3}})(BasePoint{2.0}) ==
          doctest::Approx(std::exp(0.6)));
    Json min_spec = {{"form", "min"},
                     {"args", Json::array({Json{{"form", "const"}, {"value", 1.0}},
                                           Json{{"form", "const"}, {"value", 0.25}}})}};
    CHECK(make_field(min_spec)(BasePoint{0.0}) == 0.25);
    Json poly = {{"form", "poly2d"}, {"C", 1.3}, {"p", 0.05}};
    CHECK(make_field(poly)(BasePoint{1.0, 0.5}) ==
          doctest::Approx(1.3 * std::pow(2.0, 0.05 * 1.25)).epsilon(1e-14));
    CHECK_THROWS_AS(make_field({{"form", "nope"}}), std::invalid_argument);
}

TEST_CASE("factor forms satisfy the factor law by construction") {
    auto ds = DrivingSystem::planar_shift_flow();
    FactorMap ratio = make_factor({{"form", "ratio_of"}, {"field", {{"form", "poly2d"}, {"C", 1.0}, {"p", 0.4}}}}, ds);
    BasePoint w{0.2, 0.7};
    double t = 0.9, s = 1.3;
    CHECK(ratio(t + s, w) ==
          doctest::Approx(ratio(t, ds->evolve(s, w)) * ratio(s, w)).epsilon(1e-13));

    auto dsd = DrivingSystem::integer_shift();
    FactorMap birk = make_factor({{"form", "exp_birkhoff"}, {"field", {{"form", "exp_coord"}, {"rate", -0.1}}}}, dsd);
    // S_field(3, 0) with field(k) = e^{-0.1 k} is 1 + e^{-0.1} + e^{-0.2}
    CHECK(birk(3.0, BasePoint{0.0}) ==
          doctest::Approx(std::exp(1.0 + std::exp(-0.1) + std::exp(-0.2))).epsilon(1e-14));
}

TEST_CASE("presets build into runnable scenarios") {
    for (const auto& name : preset_names()) {
        Scenario sc = build_scenario(preset_config(name));
        CHECK(sc.driving);
        CHECK(sc.cocycle);
        CHECK(sc.bounds);
        CHECK(sc.perturbation);
        CHECK(sc.name == name);
        CHECK(sc.solver.xi_points % 2 == 1);
    }
    CHECK_THROWS_AS(preset_config("no-such-preset"), std::invalid_argument);
}

TEST_CASE("config merge: user keys override preset keys recursively") {
    Json cfg;
    cfg["scenario"] = "toy-pseudo-hyperbolic";
    cfg["grids"]["xi_points"] = 21;
    cfg["tolerances"]["solve_stop"] = 1e-6;
    Scenario sc = build_scenario(cfg);
    CHECK(sc.solver.xi_points == 21);
    CHECK(sc.solver.stop_tol == 1e-6);
    CHECK(sc.solver.k_max == 40); // untouched preset value
}

TEST_CASE("scenario validation errors") {
    Json cfg = preset_config("toy-pseudo-hyperbolic");
    cfg["anchor"] = {0.0, 0.0}; // wrong dimension for integer shift
    CHECK_THROWS_AS(build_scenario(cfg), std::invalid_argument);

    Json cfg2 = preset_config("toy-pseudo-hyperbolic");
    cfg2["cocycle"]["kind"] = "unknown";
    CHECK_THROWS_AS(build_scenario(cfg2), std::invalid_argument);

    Json cfg3 = preset_config("toy-pseudo-hyperbolic");
    cfg3.erase("bounds");
    CHECK_THROWS_AS(build_scenario(cfg3), std::invalid_argument);
}

TEST_CASE("corollary configs parse with defaults") {
    Json cfg = preset_corollary_config("c42");
    CorollaryRun run = build_corollary(cfg);
    CHECK(run.kind == CorollaryKind::C42);
    CHECK(run.samples.size() == 5);
    CHECK(run.data.delta == 0.2);
    CHECK(run.horizons.g_horizon == 40.0);
    CHECK_THROWS_AS(preset_corollary_config("c99"), std::invalid_argument);
}

TEST_CASE("report json serializes deterministically") {
    Scenario sc = build_scenario(preset_config("toy-pseudo-hyperbolic"));
    SigmaTau s = compute_sigma(*sc.bounds, *sc.perturbation, sc.anchor, 40.0);
    SigmaTau t = compute_tau(*sc.bounds, *sc.perturbation, sc.anchor, 40.0);
    Json a = to_json(merge_sigma_tau(s, t));
    Json b = to_json(merge_sigma_tau(compute_sigma(*sc.bounds, *sc.perturbation, sc.anchor, 40.0),
                                     compute_tau(*sc.bounds, *sc.perturbation, sc.anchor, 40.0)));
    CHECK(a.dump() == b.dump());
}
