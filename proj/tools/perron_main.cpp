#include "perron/config.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <random>

namespace {

using namespace perron;

// exit codes: 0 pass, 1 check failed, 2 usage/config error, 3 internal invariant violated
constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kInternal = 3;

Json report_header(const std::string& command, const Json& config_echo) {
    Json j;
    j["tool"] = "perron";
    j["command"] = command;
    j["config"] = config_echo;
    return j;
}

void emit(const Json& report, const std::string& out_path) {
    std::string text = report.dump(2);
    text += "\n";
    if (out_path.empty())
        std::fputs(text.c_str(), stdout);
    else
        write_text_file(out_path, text);
}

Json load_scenario_config(const std::string& preset, const std::string& config_path) {
    if (preset.empty() && config_path.empty())
        throw std::invalid_argument("provide --preset or --config");
    Json cfg = preset.empty() ? Json::object() : preset_config(preset);
    if (!config_path.empty()) cfg = merge_config(cfg, load_config_file(config_path));
    return cfg;
}

SigmaTau pipeline_sigma_tau(const Scenario& sc) {
    const bool discrete = sc.driving->time_domain() == TimeDomain::Discrete;
    const double dt = sc.solver.time_step;
    double sigma_horizon = discrete ? sc.solver.time_points : sc.solver.time_points * dt;
    double tau_trunc = discrete ? sc.solver.l_truncation : sc.solver.l_truncation * dt;
    SigmaTau s = compute_sigma(*sc.bounds, *sc.perturbation, sc.anchor, sigma_horizon, dt);
    SigmaTau t = compute_tau(*sc.bounds, *sc.perturbation, sc.anchor, tau_trunc, dt);
    return merge_sigma_tau(s, t);
}

struct SolveOutcome {
    Json report;
    bool pass = false;
    bool internal_failure = false;
};

SolveOutcome pipeline_solve(const Scenario& sc, const std::string& phi_csv, const std::string& trace_csv) {
    SolveOutcome out;
    out.report = report_header("solve", sc.raw);

    SigmaTau st = pipeline_sigma_tau(sc);
    out.report["sigma_tau"] = to_json(st);
    if (!st.admissible()) {
        out.report["pass"] = false;
        out.report["reason"] = "sigma + tau + tail not below 1/2";
        return out;
    }

    SolverContext ctx(*sc.cocycle, *sc.bounds, *sc.perturbation, sc.anchor, sc.solver);
    SolveResult res = iterate_T(ctx, st);
    out.report["solve"] = to_json(res);

    const bool discrete = sc.driving->time_domain() == TimeDomain::Discrete;
    const double dt = sc.solver.time_step;
    const double psi_step = dt / 4.0;
    std::mt19937_64 rng(sc.seed);

    double budget = res.budget_total();
    if (!discrete)
        out.report["assumptions"] = Json::array(
            {"the perturbed system is assumed to be the unique solution of its integral equation; "
             "uniqueness is not verified numerically"});
    if (!discrete) {
        // the continuous psi evaluator is a first-order stepper; charge its
        // measured defect (with margin) against the invariance budget
        double defect = 0.0;
        std::uniform_real_distribution<double> ux(-0.8 * sc.solver.xi_extent, 0.8 * sc.solver.xi_extent);
        for (int i = 0; i < 5; ++i) {
            Vec z = Vec::Zero(sc.cocycle->fiber_dim());
            for (int a = 0; a < z.size(); ++a) z[a] = ux(rng);
            defect = std::max(defect, psi_continuous_defect(*sc.cocycle, *sc.perturbation,
                                                            sc.solver.k_max * dt / 2.0, sc.anchor, z, psi_step));
        }
        out.report["psi_defect_allowance"] = 3.0 * defect;
        budget += 3.0 * defect;
    }

    // Psi-based conclusion checks sample a bounded forward window; beyond
    // it, table error amplified along the repelling fiber direction would
    // swamp the measurement (the full-horizon Lipschitz structure is
    // certified by the membership sweeps inside the solve)
    auto step_cap = [&](int fiber) {
        return std::max(1, std::min({sc.check_max_steps, sc.solver.time_points,
                                     sc.solver.k_max - fiber}));
    };
    out.report["check_max_steps"] = sc.check_max_steps;

    // invariance of the graph under Psi
    std::vector<InvarianceSample> inv_samples;
    {
        std::uniform_int_distribution<int> ufiber(0, std::max(0, sc.solver.k_max - 1));
        std::uniform_real_distribution<double> uxi(-0.9 * sc.solver.xi_extent, 0.9 * sc.solver.xi_extent);
        for (int i = 0; i < sc.invariance_samples; ++i) {
            InvarianceSample s;
            s.fiber = ufiber(rng);
            std::uniform_int_distribution<int> usteps(1, step_cap(s.fiber));
            s.t = usteps(rng) * dt;
            s.xi = Vec(ctx.dim_E());
            do {
                for (int a = 0; a < s.xi.size(); ++a) s.xi[a] = uxi(rng);
            } while (s.xi.lpNorm<Eigen::Infinity>() < 0.2 * sc.solver.xi_extent);
            inv_samples.push_back(std::move(s));
        }
    }
    InvarianceReport inv = check_invariance(*sc.cocycle, *sc.perturbation, res.phi, inv_samples,
                                            budget, psi_step);
    out.report["invariance"] = to_json(inv);

    // growth bound along the manifold
    std::vector<GrowthSample> gr_samples;
    {
        std::uniform_int_distribution<int> ufiber(0, std::max(0, sc.solver.k_max - 1));
        std::uniform_real_distribution<double> uxi(-0.9 * sc.solver.xi_extent, 0.9 * sc.solver.xi_extent);
        for (int i = 0; i < sc.growth_pairs; ++i) {
            GrowthSample s;
            s.fiber = ufiber(rng);
            std::uniform_int_distribution<int> usteps(0, step_cap(s.fiber));
            s.t = usteps(rng) * dt;
            s.xi = Vec(ctx.dim_E());
            s.xi_bar = Vec(ctx.dim_E());
            for (int a = 0; a < s.xi.size(); ++a) s.xi[a] = uxi(rng);
            for (int a = 0; a < s.xi_bar.size(); ++a) s.xi_bar[a] = uxi(rng);
            gr_samples.push_back(std::move(s));
        }
    }
    GrowthReport gr = check_growth_bound(*sc.cocycle, *sc.perturbation, res.phi, res.mn.C, *sc.bounds,
                                         gr_samples, sc.growth_tol, psi_step);
    out.report["growth_bound"] = to_json(gr);

    out.pass = res.converged && inv.pass && gr.pass;
    out.report["pass"] = out.pass;
    if (!res.converged) out.report["reason"] = "not converged within max iterations";

    if (!phi_csv.empty()) write_phi_csv(phi_csv, res.phi);
    if (!trace_csv.empty()) write_trace_csv(trace_csv, res);
    return out;
}

Json sample_grid_json(const Scenario& sc) {
    Json grid;
    grid["times"] = sc.verify_times;
    Json pts = Json::array();
    for (const auto& p : sc.verify_points) {
        Json arr = Json::array();
        for (int i = 0; i < p.dim(); ++i) arr.push_back(p.coords[i]);
        pts.push_back(arr);
    }
    grid["points"] = pts;
    return grid;
}

int cmd_verify(const std::string& preset, const std::string& config_path, const std::string& out_path) {
    Scenario sc = build_scenario(load_scenario_config(preset, config_path));
    Json report = report_header("verify", sc.raw);
    report["sample_grid"] = sample_grid_json(sc);

    FlowReport flow = sc.driving->check_flow_property(sc.verify_times, sc.verify_points, 1e-9);
    report["flow"] = to_json(flow);
    SplittingReport split = verify_splitting(*sc.cocycle, sc.verify_times, sc.verify_points, sc.verify_tol);
    report["splitting"] = to_json(split);
    DichotomyReport dich = verify_dichotomy(*sc.cocycle, *sc.bounds, sc.verify_times, sc.verify_points,
                                            sc.dichotomy_tol);
    report["dichotomy"] = to_json(dich);
    DecayReport decay = check_decay_condition(*sc.cocycle, *sc.bounds, sc.anchor, sc.decay_horizon,
                                              sc.decay_tol);
    report["decay"] = to_json(decay);

    bool pass = flow.pass && split.pass && dich.pass && decay.pass;
    report["pass"] = pass;
    emit(report, out_path);
    std::printf("verify %s: flow=%s splitting=%s dichotomy=%s decay=%s\n", sc.name.c_str(),
                flow.pass ? "pass" : "FAIL", split.pass ? "pass" : "FAIL",
                dich.pass ? "pass" : "FAIL", decay.pass ? "pass" : "FAIL");
    return pass ? kPass : kFail;
}

int cmd_sigma_tau(const std::string& preset, const std::string& config_path, const std::string& out_path) {
    Scenario sc = build_scenario(load_scenario_config(preset, config_path));
    Json report = report_header("sigma-tau", sc.raw);
    SigmaTau st = pipeline_sigma_tau(sc);
    report["sigma_tau"] = to_json(st);
    bool pass = st.admissible();
    if (pass) report["constants"] = to_json(solve_MN(st.sigma, st.tau));
    report["pass"] = pass;
    emit(report, out_path);
    std::printf("sigma = %s, tau = %s, tail = %s -> %s\n", format_g17(st.sigma).c_str(),
                format_g17(st.tau).c_str(), format_g17(st.tau_tail_bound).c_str(),
                pass ? "admissible" : "NOT admissible");
    return pass ? kPass : kFail;
}

int cmd_solve(const std::string& preset, const std::string& config_path, const std::string& out_path,
              const std::string& phi_csv, const std::string& trace_csv) {
    Scenario sc = build_scenario(load_scenario_config(preset, config_path));
    SolveOutcome out = pipeline_solve(sc, phi_csv, trace_csv);
    emit(out.report, out_path);
    std::printf("solve %s: %s\n", sc.name.c_str(), out.pass ? "pass" : "FAIL");
    return out.pass ? kPass : kFail;
}

int cmd_check(const std::string& id, const std::string& config_path, double delta_override,
              const std::string& out_path) {
    corollary_from_id(id); // unknown ids are usage errors
    Json cfg = config_path.empty() ? preset_corollary_config(id) : load_config_file(config_path);
    if (cfg.contains("corollary")) cfg["corollary"]["id"] = id;
    if (delta_override >= 0.0) cfg["corollary"]["delta"] = delta_override;
    CorollaryRun run = build_corollary(cfg);
    HypothesisReport rep = check_corollary(run.kind, run.data, run.samples, run.horizons);
    Json report = report_header("check", cfg);
    report["hypotheses"] = to_json(rep);
    report["pass"] = rep.pass;
    emit(report, out_path);
    for (const auto& c : rep.checks)
        std::printf("  [%s] %s (margin %s)\n", c.pass ? "pass" : "FAIL", c.name.c_str(),
                    format_g17(c.margin).c_str());
    std::printf("check %s: %s\n", id.c_str(), rep.pass ? "pass" : "FAIL");
    return rep.pass ? kPass : kFail;
}

int cmd_reproduce(const std::string& preset, const std::string& outdir) {
    Json cfg = preset_config(preset);
    Scenario sc = build_scenario(cfg);
    std::filesystem::create_directories(outdir);
    auto path = [&](const char* name) { return (std::filesystem::path(outdir) / name).string(); };

    int verify_rc = cmd_verify(preset, "", path("verify.json"));
    int sigma_rc = cmd_sigma_tau(preset, "", path("sigma_tau.json"));

    SolveOutcome out = pipeline_solve(sc, path("phi.csv"), path("trace.csv"));
    emit(out.report, path("solve.json"));
    std::printf("solve %s: %s\n", sc.name.c_str(), out.pass ? "pass" : "FAIL");

    bool pass = verify_rc == kPass && sigma_rc == kPass && out.pass;
    std::printf("reproduce %s: %s (reports in %s)\n", preset.c_str(), pass ? "pass" : "FAIL",
                outdir.c_str());
    return pass ? kPass : kFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lyapunov-Perron invariant-manifold toolkit for perturbed linear random dynamical systems"};
    app.require_subcommand(1);

    std::string preset, config_path, out_path, phi_csv, trace_csv, outdir;
    double delta_override = -1.0;

    auto add_scenario_opts = [&](CLI::App* cmd) {
        cmd->add_option("--preset", preset, "built-in scenario name");
        cmd->add_option("--config", config_path, "config file (JSON)");
        cmd->add_option("--out", out_path, "write the report here instead of stdout");
    };

    CLI::App* verify = app.add_subcommand("verify", "check flow, splitting, dichotomy and decay");
    add_scenario_opts(verify);

    CLI::App* sigma_tau = app.add_subcommand("sigma-tau", "compute sigma, tau, tail and the constants M, N, C, q");
    add_scenario_opts(sigma_tau);

    CLI::App* solve = app.add_subcommand("solve", "run the fixed-point iteration and certify invariance and growth");
    add_scenario_opts(solve);
    solve->add_option("--phi-csv", phi_csv, "export the graph table");
    solve->add_option("--trace-csv", trace_csv, "export the per-iteration trace");

    std::string check_id;
    CLI::App* check = app.add_subcommand("check", "corollary hypothesis checker (c32, c33, c34, c42, c43, c44)");
    check->add_option("id", check_id, "corollary id")->required();
    check->add_option("--config", config_path, "config file with a 'corollary' section");
    check->add_option("--delta", delta_override, "override delta");
    check->add_option("--out", out_path, "write the report here instead of stdout");

    std::string reproduce_name;
    CLI::App* reproduce = app.add_subcommand("reproduce", "run a built-in scenario end to end");
    reproduce->add_option("preset", reproduce_name, "scenario name")->required();
    reproduce->add_option("--outdir", outdir, "report directory")->default_val("reproduce-out");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        if (verify->parsed()) return cmd_verify(preset, config_path, out_path);
        if (sigma_tau->parsed()) return cmd_sigma_tau(preset, config_path, out_path);
        if (solve->parsed()) return cmd_solve(preset, config_path, out_path, phi_csv, trace_csv);
        if (check->parsed()) return cmd_check(check_id, config_path, delta_override, out_path);
        if (reproduce->parsed()) return cmd_reproduce(reproduce_name, outdir);
        return kUsage;
    } catch (const ContractionViolation& e) {
        std::fprintf(stderr, "internal consistency failure: %s\n", e.what());
        return kInternal;
    } catch (const AdmissibilityError& e) {
        std::fprintf(stderr, "inadmissible inputs: %s\n", e.what());
        return kFail;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kUsage;
    } catch (const Json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kUsage;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "evaluation error: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kInternal;
    }
}
