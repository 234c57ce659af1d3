#pragma once

#include "perron/corollaries.hpp"
#include "perron/psi.hpp"
#include "perron/report.hpp"

#include <memory>
#include <optional>

namespace perron {

// A fully assembled run: driving system, cocycle, bounds, perturbation and
// every numeric knob, built from one config document.
struct Scenario {
    std::string name;
    DrivingPtr driving;
    std::shared_ptr<SplitCocycle> cocycle;
    std::shared_ptr<DichotomyBounds> bounds;
    std::shared_ptr<Perturbation> perturbation;
    BasePoint anchor;
    SolverOptions solver;

    double verify_tol = 1e-12;
    double dichotomy_tol = 1e-9;
    double decay_tol = 1e-4;
    double decay_horizon = 40.0;
    double growth_tol = 1e-9;
    int invariance_samples = 200;
    int growth_pairs = 1000;
    // Psi-based conclusion checks sample t <= check_max_steps * time_step.
    // Larger horizons amplify table error along the repelling fiber
    // direction (the factor is alpha^- inverse growth times 1/alpha^+) and
    // measure noise, not the invariance property; the membership sweeps certify the
    // full-horizon Lipschitz structure instead.
    int check_max_steps = 5;
    std::uint64_t seed = 20240613;

    // sample grids for the verification sweeps
    std::vector<double> verify_times;
    std::vector<BasePoint> verify_points;

    Json raw; // config echoed into reports
};

struct CorollaryRun {
    CorollaryKind kind = CorollaryKind::C42;
    CorollaryData data;
    CorollaryHorizons horizons;
    std::vector<BasePoint> samples;
    Json raw;
};

// Scalar random variables on the base space, named forms:
//   {"form":"const","value":v}
//   {"form":"exp_coord","rate":r,"scale":s}        s e^{r x0}
//   {"form":"geometric","scale":s,"base":b}        s b^{|x0|}
//   {"form":"poly2d","C":c,"p":p}                  c (1+x0^2)^{p (1+x1^2)}
//   {"form":"bump","scale":s}                      s / (1+x0^2)
//   {"form":"one_plus_gauss","amplitude":a}        1 + a e^{-x0^2}
//   {"form":"min","args":[...]}
//   {"form":"scale","factor":f,"arg":{...}}
ScalarField make_field(const Json& spec);

// Cocycle factors:
//   {"form":"exp_rate","rate":r}                   e^{r t}
//   {"form":"ratio_of","field":{...}}              field(w)/field(theta^t w)
//   {"form":"exp_birkhoff","field":{...}}          e^{S_field(n,w)}   (discrete)
//   {"form":"exp_integral","field":{...},"step":h} e^{int_0^t field}  (continuous)
FactorMap make_factor(const Json& spec, DrivingPtr driving);

DrivingPtr make_driving(const Json& spec);

// Built-in scenarios: toy-pseudo-hyperbolic, tempered-exp, example2-poly.
Json preset_config(const std::string& name);
std::vector<std::string> preset_names();

// Built-in corollary datasets (passing hypotheses) for c32..c44.
Json preset_corollary_config(const std::string& id);

Json load_config_file(const std::string& path);

// Recursive object merge; values in `over` win.
Json merge_config(Json base, const Json& over);

Scenario build_scenario(const Json& config);
CorollaryRun build_corollary(const Json& config);

} // namespace perron
