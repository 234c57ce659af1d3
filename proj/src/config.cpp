#include "perron/config.hpp"

#include <cmath>
#include <fstream>

namespace perron {

namespace {

double num(const Json& j, const char* key) {
    if (!j.contains(key))
        throw std::invalid_argument(std::string("config: missing numeric key '") + key + "'");
    return j.at(key).get<double>();
}

double num_or(const Json& j, const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

int int_or(const Json& j, const char* key, int fallback) {
    return j.contains(key) ? j.at(key).get<int>() : fallback;
}

const Json& section(const Json& j, const char* key) {
    if (!j.contains(key))
        throw std::invalid_argument(std::string("config: missing section '") + key + "'");
    return j.at(key);
}

} // namespace

ScalarField make_field(const Json& spec) {
    if (!spec.is_object() || !spec.contains("form"))
        throw std::invalid_argument("field spec must be an object with a 'form' key");
    const std::string form = spec.at("form").get<std::string>();
    if (form == "const") {
        double v = num(spec, "value");
        return [v](const BasePoint&) { return v; };
    }
    if (form == "exp_coord") {
        double r = num(spec, "rate");
        double s = num_or(spec, "scale", 1.0);
        return [r, s](const BasePoint& w) { return s * std::exp(r * w.coords[0]); };
    }
    if (form == "geometric") {
        double s = num(spec, "scale");
        double b = num(spec, "base");
        return [s, b](const BasePoint& w) { return s * std::pow(b, std::abs(w.coords[0])); };
    }
    if (form == "poly2d") {
        double c = num(spec, "C");
        double p = num(spec, "p");
        return [c, p](const BasePoint& w) {
            double y = w.dim() > 1 ? w.coords[1] : 0.0;
            return c * std::pow(1.0 + w.coords[0] * w.coords[0], p * (1.0 + y * y));
        };
    }
    if (form == "bump") {
        double s = num(spec, "scale");
        return [s](const BasePoint& w) { return s / (1.0 + w.coords[0] * w.coords[0]); };
    }
    if (form == "one_plus_gauss") {
        double a = num(spec, "amplitude");
        return [a](const BasePoint& w) { return 1.0 + a * std::exp(-w.coords[0] * w.coords[0]); };
    }
    if (form == "min") {
        if (!spec.contains("args") || !spec.at("args").is_array() || spec.at("args").empty())
            throw std::invalid_argument("field form 'min' needs a nonempty 'args' array");
        std::vector<ScalarField> args;
        for (const auto& a : spec.at("args")) args.push_back(make_field(a));
        return [args](const BasePoint& w) {
            double v = args[0](w);
            for (std::size_t i = 1; i < args.size(); ++i) v = std::min(v, args[i](w));
            return v;
        };
    }
    if (form == "scale") {
        double f = num(spec, "factor");
        ScalarField arg = make_field(section(spec, "arg"));
        return [f, arg](const BasePoint& w) { return f * arg(w); };
    }
    throw std::invalid_argument("unknown field form: " + form);
}

FactorMap make_factor(const Json& spec, DrivingPtr driving) {
    if (!spec.is_object() || !spec.contains("form"))
        throw std::invalid_argument("factor spec must be an object with a 'form' key");
    const std::string form = spec.at("form").get<std::string>();
    if (form == "exp_rate") {
        double r = num(spec, "rate");
        return [r](double t, const BasePoint&) { return std::exp(r * t); };
    }
    if (form == "ratio_of") {
        ScalarField field = make_field(section(spec, "field"));
        return [field, driving](double t, const BasePoint& w) {
            return field(w) / field(driving->evolve(t, w));
        };
    }
    if (form == "exp_birkhoff") {
        ScalarField field = make_field(section(spec, "field"));
        return [field, driving](double n, const BasePoint& w) {
            return std::exp(birkhoff_sum(field, n, w, *driving));
        };
    }
    if (form == "exp_integral") {
        ScalarField field = make_field(section(spec, "field"));
        double step = num(spec, "step");
        return [field, driving, step](double t, const BasePoint& w) {
            if (t == 0.0) return 1.0;
            int n = std::max(1, static_cast<int>(std::ceil(t / step)));
            double h = t / n;
            double sum = 0.5 * (field(w) + field(driving->evolve(t, w)));
            for (int i = 1; i < n; ++i) sum += field(driving->evolve(i * h, w));
            return std::exp(sum * h);
        };
    }
    throw std::invalid_argument("unknown factor form: " + form);
}

DrivingPtr make_driving(const Json& spec) {
    const std::string kind = section(spec, "kind").get<std::string>();
    TimeDomain td = TimeDomain::Discrete;
    if (spec.contains("time_domain")) {
        const std::string t = spec.at("time_domain").get<std::string>();
        if (t == "discrete")
            td = TimeDomain::Discrete;
        else if (t == "continuous")
            td = TimeDomain::Continuous;
        else
            throw std::invalid_argument("time_domain must be 'discrete' or 'continuous'");
    } else if (kind == "planar_shift_flow") {
        td = TimeDomain::Continuous;
    }
    if (kind == "circle_rotation")
        return DrivingSystem::circle_rotation(num(spec, "angle"), td);
    if (kind == "planar_shift_flow")
        return DrivingSystem::planar_shift_flow(td);
    if (kind == "integer_shift")
        return DrivingSystem::integer_shift();
    if (kind == "user_table") {
        std::vector<TableEntry> entries;
        for (const auto& e : section(spec, "entries")) {
            TableEntry te;
            te.t = e.at("t").get<double>();
            auto from = e.at("from").get<std::vector<double>>();
            auto to = e.at("to").get<std::vector<double>>();
            te.from = Eigen::Map<const Vec>(from.data(), static_cast<Eigen::Index>(from.size()));
            te.to = Eigen::Map<const Vec>(to.data(), static_cast<Eigen::Index>(to.size()));
            entries.push_back(std::move(te));
        }
        return DrivingSystem::user_table(std::move(entries), int_or(spec, "base_dim", 1), td);
    }
    throw std::invalid_argument("unknown driving kind: " + kind);
}

Json preset_config(const std::string& name) {
    if (name == "toy-pseudo-hyperbolic") {
        Json j;
        j["scenario_name"] = name;
        j["threads"] = 1;
        j["seed"] = 20240613;
        j["driving"] = {{"kind", "integer_shift"}};
        j["anchor"] = {0.0};
        j["cocycle"] = {{"kind", "split_factor"},
                        {"norm", "max"},
                        {"K", {{"form", "const"}, {"value", 1.0}}},
                        {"phi", {{"form", "exp_rate"}, {"rate", -0.5}}},
                        {"psi", {{"form", "exp_rate"}, {"rate", -0.4}}}};
        j["bounds"] = {{"family", "tempered_exp"},
                       {"K", {{"form", "const"}, {"value", 1.0}}},
                       {"a", {{"form", "const"}, {"value", -0.5}}},
                       {"b", {{"form", "const"}, {"value", -0.4}}}};
        j["perturbation"] = {{"kind", "sine2d"},
                             {"scale", {{"form", "geometric"}, {"scale", 0.05}, {"base", 0.5}}}};
        j["grids"] = {{"xi_extent", 1.0}, {"xi_points", 41},   {"k_max", 40},
                      {"horizon", 40},    {"time_step", 1.0}, {"l_truncation", 40}};
        j["tolerances"] = {{"verify", 1e-12}, {"dichotomy", 1e-9}, {"decay", 1e-4},
                           {"solve_stop", 1e-8}, {"ratio", 1e-6},  {"growth", 1e-9},
                           {"membership", 1e-6}};
        j["checks"] = {{"invariance_samples", 200}, {"growth_pairs", 1000}, {"decay_horizon", 40}};
        return j;
    }
    if (name == "tempered-exp") {
        Json j;
        j["scenario_name"] = name;
        j["threads"] = 1;
        j["seed"] = 20240613;
        j["driving"] = {{"kind", "planar_shift_flow"}};
        j["anchor"] = {0.0, 0.0};
        j["cocycle"] = {{"kind", "split_factor"},
                        {"norm", "max"},
                        {"K", {{"form", "one_plus_gauss"}, {"amplitude", 0.5}}},
                        {"phi", {{"form", "exp_rate"}, {"rate", -0.6}}},
                        {"psi", {{"form", "exp_rate"}, {"rate", -0.5}}}};
        j["bounds"] = {{"family", "tempered_exp"},
                       {"K", {{"form", "one_plus_gauss"}, {"amplitude", 0.5}}},
                       {"a", {{"form", "const"}, {"value", -0.6}}},
                       {"b", {{"form", "const"}, {"value", -0.5}}}};
        j["perturbation"] = {{"kind", "sine2d"}, {"scale", {{"form", "bump"}, {"scale", 0.02}}}};
        j["grids"] = {{"xi_extent", 1.0}, {"xi_points", 21},   {"k_max", 30},
                      {"horizon", 60},    {"time_step", 0.1}, {"l_truncation", 60}};
        j["tolerances"] = {{"verify", 1e-12}, {"dichotomy", 1e-9}, {"decay", 0.01},
                           {"solve_stop", 1e-7}, {"ratio", 1e-6},  {"growth", 1e-9},
                           {"membership", 1e-6}};
        j["checks"] = {{"invariance_samples", 100}, {"growth_pairs", 1000}, {"decay_horizon", 40}};
        return j;
    }
    if (name == "example2-poly") {
        Json j;
        j["scenario_name"] = name;
        j["threads"] = 1;
        j["seed"] = 20240613;
        j["driving"] = {{"kind", "planar_shift_flow"}};
        j["anchor"] = {0.0, 0.5};
        Json a_field = {{"form", "poly2d"}, {"C", 1.0}, {"p", 0.4}};
        Json b_field = {{"form", "poly2d"}, {"C", 1.0}, {"p", 0.3}};
        Json k_field = {{"form", "poly2d"}, {"C", 1.3}, {"p", 0.05}};
        j["cocycle"] = {{"kind", "split_factor"},
                        {"norm", "max"},
                        {"K", k_field},
                        {"phi", {{"form", "ratio_of"}, {"field", a_field}}},
                        {"psi", {{"form", "ratio_of"}, {"field", b_field}}}};
        j["bounds"] = {{"family", "ratio_form"}, {"K", k_field}, {"a", a_field}, {"b", b_field}};
        j["perturbation"] = {{"kind", "sine2d"}, {"scale", {{"form", "bump"}, {"scale", 0.02}}}};
        j["grids"] = {{"xi_extent", 1.0}, {"xi_points", 21},   {"k_max", 30},
                      {"horizon", 60},    {"time_step", 0.1}, {"l_truncation", 60}};
        j["tolerances"] = {{"verify", 1e-12}, {"dichotomy", 1e-9}, {"decay", 0.005},
                           {"solve_stop", 1e-7}, {"ratio", 1e-6},  {"growth", 1e-9},
                           {"membership", 1e-6}};
        j["checks"] = {{"invariance_samples", 100}, {"growth_pairs", 1000}, {"decay_horizon", 40}};
        return j;
    }
    throw std::invalid_argument("unknown preset: " + name);
}

std::vector<std::string> preset_names() {
    return {"toy-pseudo-hyperbolic", "tempered-exp", "example2-poly"};
}

Json preset_corollary_config(const std::string& id) {
    Json geom_third = {{"form", "geometric"}, {"scale", 1.0 / 3.0}, {"base", 0.5}};
    Json bump_g = {{"form", "bump"}, {"scale", 0.3}};
    Json j;
    j["corollary"]["id"] = id;
    j["corollary"]["delta"] = 0.2;
    j["corollary"]["samples"] = 5;
    if (id == "c32") {
        j["corollary"]["driving"] = {{"kind", "planar_shift_flow"}};
        j["corollary"]["anchor"] = {0.0, 0.0};
        j["corollary"]["K"] = {{"form", "one_plus_gauss"}, {"amplitude", 0.5}};
        j["corollary"]["a"] = {{"form", "const"}, {"value", -0.6}};
        j["corollary"]["b"] = {{"form", "const"}, {"value", -0.5}};
        j["corollary"]["gamma"] = {{"form", "const"}, {"value", 0.1}};
        j["corollary"]["G"] = bump_g;
        j["corollary"]["lip"] = {{"form", "const"}, {"value", 0.002}};
    } else if (id == "c33") {
        j["corollary"]["driving"] = {{"kind", "planar_shift_flow"}};
        j["corollary"]["anchor"] = {0.0, 0.0};
        j["corollary"]["K"] = {{"form", "one_plus_gauss"}, {"amplitude", 0.5}};
        j["corollary"]["a"] = {{"form", "const"}, {"value", -0.6}};
        j["corollary"]["b"] = {{"form", "const"}, {"value", -0.5}};
        j["corollary"]["G"] = bump_g;
        j["corollary"]["lip"] = {{"form", "const"}, {"value", 0.003}};
    } else if (id == "c34") {
        j["corollary"]["driving"] = {{"kind", "planar_shift_flow"}};
        j["corollary"]["anchor"] = {0.0, 0.0};
        j["corollary"]["K"] = {{"form", "const"}, {"value", 1.0}};
        j["corollary"]["a"] = {{"form", "exp_coord"}, {"rate", 0.3}};
        j["corollary"]["b"] = {{"form", "exp_coord"}, {"rate", 0.2}};
        j["corollary"]["G"] = bump_g;
        j["corollary"]["lip"] = {{"form", "const"}, {"value", 0.003}};
    } else if (id == "c42") {
        j["corollary"]["driving"] = {{"kind", "integer_shift"}};
        j["corollary"]["anchor"] = {0.0};
        j["corollary"]["K"] = {{"form", "const"}, {"value", 1.0}};
        j["corollary"]["a"] = {{"form", "const"}, {"value", -0.6}};
        j["corollary"]["b"] = {{"form", "const"}, {"value", -0.3}};
        j["corollary"]["gamma"] = {{"form", "const"}, {"value", 0.1}};
        j["corollary"]["G"] = geom_third;
        // delta/K(theta w) * e^a * G at k=0 is the binding ceiling
        j["corollary"]["lip"] = {{"form", "scale"},
                                 {"factor", 0.2 * std::exp(-0.6)},
                                 {"arg", geom_third}};
    } else if (id == "c43") {
        j["corollary"]["driving"] = {{"kind", "integer_shift"}};
        j["corollary"]["anchor"] = {0.0};
        j["corollary"]["K"] = {{"form", "const"}, {"value", 1.0}};
        j["corollary"]["a"] = {{"form", "const"}, {"value", -0.6}};
        j["corollary"]["b"] = {{"form", "const"}, {"value", -0.3}};
        j["corollary"]["G"] = geom_third;
        j["corollary"]["lip"] = {{"form", "const"}, {"value", 0.002}};
    } else if (id == "c44") {
        j["corollary"]["driving"] = {{"kind", "integer_shift"}};
        j["corollary"]["anchor"] = {0.0};
        j["corollary"]["K"] = {{"form", "const"}, {"value", 1.0}};
        j["corollary"]["a"] = {{"form", "exp_coord"}, {"rate", 0.3}};
        j["corollary"]["b"] = {{"form", "exp_coord"}, {"rate", 0.2}};
        j["corollary"]["G"] = geom_third;
        j["corollary"]["lip"] = {{"form", "const"}, {"value", 0.004}};
    } else {
        throw std::invalid_argument("unknown corollary id: " + id);
    }
    return j;
}

Json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open config file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::invalid_argument("config parse error in " + path + ": " + e.what());
    }
    return j;
}

Json merge_config(Json base, const Json& over) {
    if (!over.is_object() || !base.is_object())
        return over;
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (base.contains(it.key()) && base.at(it.key()).is_object() && it.value().is_object())
            base[it.key()] = merge_config(base.at(it.key()), it.value());
        else
            base[it.key()] = it.value();
    }
    return base;
}

namespace {

BasePoint parse_point(const Json& arr) {
    auto xs = arr.get<std::vector<double>>();
    return BasePoint(Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size())));
}

NormKind parse_norm(const Json& cocycle_spec) {
    std::string n = cocycle_spec.contains("norm") ? cocycle_spec.at("norm").get<std::string>() : "max";
    if (n == "max") return NormKind::MaxNorm;
    if (n == "euclidean") return NormKind::Euclidean;
    throw std::invalid_argument("cocycle norm must be 'max' or 'euclidean'");
}

} // namespace

Scenario build_scenario(const Json& config) {
    Json merged = config;
    if (config.contains("scenario")) {
        merged = merge_config(preset_config(config.at("scenario").get<std::string>()), config);
        merged.erase("scenario");
    }

    Scenario sc;
    sc.raw = merged;
    sc.name = merged.contains("scenario_name") ? merged.at("scenario_name").get<std::string>() : "custom";
    sc.driving = make_driving(section(merged, "driving"));
    sc.anchor = parse_point(section(merged, "anchor"));
    if (sc.anchor.dim() != sc.driving->base_dim())
        throw std::invalid_argument("config: anchor dimension does not match the driving system");

    const Json& co = section(merged, "cocycle");
    const std::string ckind = section(co, "kind").get<std::string>();
    if (ckind != "split_factor")
        throw std::invalid_argument("config: unknown cocycle kind: " + ckind);
    sc.cocycle = std::make_shared<SplitCocycle>(split_factor_cocycle(
        make_field(section(co, "K")), make_factor(section(co, "phi"), sc.driving),
        make_factor(section(co, "psi"), sc.driving), sc.driving, parse_norm(co)));

    const Json& bo = section(merged, "bounds");
    const std::string family = section(bo, "family").get<std::string>();
    ScalarField bk = make_field(section(bo, "K"));
    ScalarField ba = make_field(section(bo, "a"));
    ScalarField bb = make_field(section(bo, "b"));
    double grid_step = num_or(section(merged, "grids"), "time_step", 1.0);
    if (family == "tempered_exp")
        sc.bounds = std::make_shared<DichotomyBounds>(DichotomyBounds::tempered_exp(sc.driving, bk, ba, bb));
    else if (family == "integral_exp")
        sc.bounds = std::make_shared<DichotomyBounds>(
            DichotomyBounds::integral_exp(sc.driving, bk, ba, bb, num_or(bo, "quad_step", grid_step)));
    else if (family == "birkhoff_exp")
        sc.bounds = std::make_shared<DichotomyBounds>(DichotomyBounds::birkhoff_exp(sc.driving, bk, ba, bb));
    else if (family == "ratio_form")
        sc.bounds = std::make_shared<DichotomyBounds>(DichotomyBounds::ratio_form(sc.driving, bk, ba, bb));
    else
        throw std::invalid_argument("config: unknown bounds family: " + family);

    const Json& pe = section(merged, "perturbation");
    const std::string pkind = section(pe, "kind").get<std::string>();
    if (pkind == "zero")
        sc.perturbation = std::make_shared<Perturbation>(Perturbation::zero(sc.cocycle->fiber_dim()));
    else if (pkind == "sine2d")
        sc.perturbation = std::make_shared<Perturbation>(Perturbation::sine2d(make_field(section(pe, "scale"))));
    else
        throw std::invalid_argument("config: unknown perturbation kind: " + pkind);

    const Json& gr = section(merged, "grids");
    sc.solver.xi_extent = num_or(gr, "xi_extent", 1.0);
    sc.solver.xi_points = int_or(gr, "xi_points", 41);
    sc.solver.k_max = int_or(gr, "k_max", 40);
    sc.solver.time_points = int_or(gr, "horizon", 40);
    sc.solver.time_step = num_or(gr, "time_step", 1.0);
    sc.solver.l_truncation = int_or(gr, "l_truncation", sc.solver.time_points);

    const Json empty = Json::object();
    const Json& to = merged.contains("tolerances") ? merged.at("tolerances") : empty;
    sc.verify_tol = num_or(to, "verify", 1e-12);
    sc.dichotomy_tol = num_or(to, "dichotomy", 1e-9);
    sc.decay_tol = num_or(to, "decay", 1e-4);
    sc.solver.stop_tol = num_or(to, "solve_stop", 1e-8);
    sc.solver.ratio_tol = num_or(to, "ratio", 1e-6);
    sc.solver.membership_tol = num_or(to, "membership", 1e-6);
    sc.growth_tol = num_or(to, "growth", 1e-9);

    const Json& ch = merged.contains("checks") ? merged.at("checks") : empty;
    sc.invariance_samples = int_or(ch, "invariance_samples", 200);
    sc.growth_pairs = int_or(ch, "growth_pairs", 1000);
    sc.decay_horizon = num_or(ch, "decay_horizon", 40.0);
    int default_steps = sc.driving->time_domain() == TimeDomain::Discrete
                            ? 5
                            : std::max(1, static_cast<int>(std::lround(1.0 / sc.solver.time_step)));
    sc.check_max_steps = int_or(ch, "max_steps", default_steps);

    sc.solver.threads = int_or(merged, "threads", 1);
    sc.solver.max_iterations = int_or(merged, "max_iterations", 200);
    sc.seed = merged.contains("seed") ? merged.at("seed").get<std::uint64_t>() : 20240613u;

    // verification sample grid
    if (merged.contains("verify") && merged.at("verify").contains("times"))
        sc.verify_times = merged.at("verify").at("times").get<std::vector<double>>();
    else if (sc.driving->time_domain() == TimeDomain::Discrete)
        sc.verify_times = {0.0, 1.0, 2.0, 3.0, 5.0, 8.0};
    else
        sc.verify_times = {0.0, 0.4, 1.0, 1.7, 2.5};
    if (merged.contains("verify") && merged.at("verify").contains("points")) {
        for (const auto& p : merged.at("verify").at("points"))
            sc.verify_points.push_back(parse_point(p));
    } else {
        sc.verify_points = sc.driving->sample_points(4);
        sc.verify_points.push_back(sc.anchor);
    }
    return sc;
}

CorollaryRun build_corollary(const Json& config) {
    const Json& co = section(config, "corollary");
    CorollaryRun run;
    run.raw = config;
    run.kind = corollary_from_id(section(co, "id").get<std::string>());
    run.data.driving = co.contains("driving")
                           ? make_driving(co.at("driving"))
                           : (corollary_is_discrete(run.kind)
                                  ? DrivingSystem::integer_shift()
                                  : DrivingSystem::planar_shift_flow());
    run.data.K = make_field(section(co, "K"));
    run.data.a = make_field(section(co, "a"));
    run.data.b = make_field(section(co, "b"));
    run.data.G = make_field(section(co, "G"));
    run.data.lip = make_field(section(co, "lip"));
    if (co.contains("gamma")) run.data.gamma = make_field(co.at("gamma"));
    run.data.delta = num(co, "delta");

    const Json empty = Json::object();
    const Json& hz = co.contains("horizons") ? co.at("horizons") : empty;
    run.horizons.g_horizon = num_or(hz, "g", 40.0);
    run.horizons.temper_horizon = num_or(hz, "temper", 40.0);
    run.horizons.decay_horizon = num_or(hz, "decay", 40.0);
    run.horizons.decay_tol = num_or(hz, "decay_tol", 0.01);
    run.horizons.quad_step = num_or(hz, "quad_step", 0.1);
    run.horizons.fd_step_scale = num_or(hz, "fd_step_scale", 1e-4);

    BasePoint anchor = co.contains("anchor")
                           ? parse_point(co.at("anchor"))
                           : BasePoint(Vec::Zero(run.data.driving->base_dim()));
    int n = int_or(co, "samples", 5);
    for (int k = 0; k < n; ++k)
        run.samples.push_back(run.data.driving->evolve(static_cast<double>(k), anchor));
    return run;
}

} // namespace perron
