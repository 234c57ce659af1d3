#include "perron/report.hpp"

#include <cstdio>
#include <fstream>

namespace perron {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

Json point_json(const BasePoint& w) {
    Json arr = Json::array();
    for (int i = 0; i < w.dim(); ++i) arr.push_back(w.coords[i]);
    return arr;
}

} // namespace

Json to_json(const FlowReport& rep) {
    Json j;
    j["max_composition_residual"] = rep.max_composition_residual;
    j["max_identity_residual"] = rep.max_identity_residual;
    j["tol"] = rep.tol;
    j["pass"] = rep.pass;
    j["witness"] = {{"t", rep.witness_t}, {"s", rep.witness_s}, {"point", point_json(rep.witness_point)}};
    return j;
}

Json to_json(const SplittingReport& rep) {
    Json j;
    j["identity_residual"] = rep.identity_residual;
    j["idempotence_residual"] = rep.idempotence_residual;
    j["equivariance_residual"] = rep.equivariance_residual;
    j["cocycle_residual"] = rep.cocycle_residual;
    j["kernel_residual"] = rep.kernel_residual;
    j["invertibility_margin"] = rep.invertibility_margin;
    j["tol"] = rep.tol;
    j["pass"] = rep.pass;
    if (!rep.pass) j["worst_condition"] = rep.worst_condition;
    return j;
}

Json to_json(const DichotomyReport& rep) {
    Json j;
    j["pass"] = rep.pass;
    j["tol"] = rep.tol;
    j["worst_slack_d1"] = rep.worst_slack_d1;
    j["worst_slack_d2"] = rep.worst_slack_d2;
    j["witness_d1"] = {{"t", rep.witness_t_d1}, {"point", point_json(rep.witness_w_d1)}};
    j["witness_d2"] = {{"t", rep.witness_t_d2}, {"point", point_json(rep.witness_w_d2)}};
    j["samples"] = rep.samples;
    return j;
}

Json to_json(const DecayReport& rep) {
    Json j;
    j["pass"] = rep.pass;
    j["tol"] = rep.tol;
    j["final_value"] = rep.final_value;
    j["eventually_decreasing"] = rep.eventually_decreasing;
    j["horizon"] = rep.times.empty() ? 0.0 : rep.times.back();
    j["samples"] = rep.times.size();
    // the tabulated product p(t) is the evidence; keep it in the report
    j["times"] = rep.times;
    j["products"] = rep.products;
    return j;
}

Json to_json(const SigmaTau& st) {
    Json j;
    j["sigma"] = st.sigma;
    j["tau"] = st.tau;
    j["tau_tail_bound"] = st.tau_tail_bound;
    j["sigma_horizon"] = st.sigma_horizon;
    j["tau_truncation"] = st.tau_truncation;
    j["tail_available"] = st.tail_available;
    j["total"] = st.total();
    j["admissible"] = st.admissible();
    return j;
}

Json to_json(const MNConstants& mn) {
    Json j;
    j["M"] = mn.M;
    j["N"] = mn.N;
    j["C"] = mn.C;
    j["q"] = mn.q;
    j["sigma_identity_residual"] = mn.sigma_residual;
    j["tau_identity_residual"] = mn.tau_residual;
    return j;
}

Json to_json(const TemperednessReport& rep) {
    Json j;
    j["lambda"] = rep.lambda;
    j["gamma"] = rep.gamma;
    j["horizon"] = rep.horizon;
    j["diverging"] = rep.diverging;
    return j;
}

Json to_json(const HypothesisReport& rep) {
    Json j;
    j["corollary"] = corollary_id(rep.kind);
    j["pass"] = rep.pass;
    Json checks = Json::array();
    for (const auto& c : rep.checks) {
        Json cj;
        cj["name"] = c.name;
        cj["pass"] = c.pass;
        cj["margin"] = c.margin;
        cj["witness"] = c.witness;
        checks.push_back(cj);
    }
    j["checks"] = checks;
    return j;
}

Json to_json(const SolveResult& res) {
    Json j;
    j["sigma_tau"] = to_json(res.sigma_tau);
    j["constants"] = to_json(res.mn);
    j["converged"] = res.converged;
    j["iterations"] = res.iterations;
    j["final_step"] = res.final_step;
    j["d1_steps"] = res.d1_steps;
    j["d2_steps"] = res.d2_steps;
    j["d_steps"] = res.d_steps;
    j["ratios"] = res.ratios;
    j["clamp_count"] = res.clamp_count;
    j["offwindow_reads"] = res.offwindow_reads;
    j["degraded_accuracy"] = res.degraded;
    j["l_tail_bound"] = res.l_tail_bound;
    j["fixed_point_residual_d1"] = res.fixed_point_residual_d1;
    j["fixed_point_residual_d2"] = res.fixed_point_residual_d2;
    j["equivalence_residual"] = res.equivalence_residual;
    j["membership_excess_h"] = res.membership_excess_h;
    j["membership_excess_phi"] = res.membership_excess_phi;
    j["budget"] = {{"stop_tol", res.budget_stop_tol},
                   {"l_tail", res.budget_tail},
                   {"grid_allowance", res.budget_grid},
                   {"total", res.budget_total()}};
    j["grid"] = {{"dim", res.phi.grid.dim()},
                 {"extent", res.phi.grid.extent()},
                 {"points_per_axis", res.phi.grid.points_per_axis()},
                 {"spacing", res.phi.grid.spacing()}};
    j["fibers_tabulated"] = res.phi.fibers.size();
    j["fibers_reported"] = res.phi.reported_fibers;
    // metrics are sups over the tabulated orbit window only, not over the
    // full base space
    j["metric_scope"] = "orbit-restricted";
    return j;
}

Json to_json(const InvarianceReport& rep) {
    Json j;
    j["max_residual"] = rep.max_residual;
    j["budget"] = rep.budget;
    j["pass"] = rep.pass;
    j["samples"] = rep.samples;
    Json w;
    w["fiber"] = rep.witness.fiber;
    w["t"] = rep.witness.t;
    Json xi = Json::array();
    for (int i = 0; i < rep.witness.xi.size(); ++i) xi.push_back(rep.witness.xi[i]);
    w["xi"] = xi;
    j["witness"] = w;
    return j;
}

Json to_json(const GrowthReport& rep) {
    Json j;
    j["worst_ratio"] = rep.worst_ratio;
    j["limit_C"] = rep.limit;
    j["pass"] = rep.pass;
    j["samples"] = rep.samples;
    return j;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out)
        throw std::runtime_error("write failed: " + path);
}

void write_phi_csv(const std::string& path, const GraphFunction& gf) {
    std::string csv;
    csv += "fiber_index";
    for (int a = 0; a < gf.grid.dim(); ++a) csv += ",xi_" + std::to_string(a);
    const int dim_f = gf.values.empty() ? 0 : static_cast<int>(gf.values[0].cols());
    for (int a = 0; a < dim_f; ++a) csv += ",phi_" + std::to_string(a);
    csv += "\n";
    const int last = std::min<int>(gf.reported_fibers, static_cast<int>(gf.fibers.size()) - 1);
    for (int j = 0; j <= last; ++j) {
        const Mat& vals = gf.values[static_cast<std::size_t>(j)];
        for (int g = 0; g < gf.grid.total_points(); ++g) {
            csv += std::to_string(j);
            Vec xi = gf.grid.point(g);
            for (int a = 0; a < xi.size(); ++a) csv += "," + format_g17(xi[a]);
            for (int a = 0; a < dim_f; ++a) csv += "," + format_g17(vals(g, a));
            csv += "\n";
        }
    }
    write_text_file(path, csv);
}

void write_trace_csv(const std::string& path, const SolveResult& res) {
    std::string csv = "iteration,d1_step,d2_step,d_step,ratio\n";
    for (std::size_t i = 0; i < res.d_steps.size(); ++i) {
        csv += std::to_string(i + 1);
        csv += "," + format_g17(res.d1_steps[i]);
        csv += "," + format_g17(res.d2_steps[i]);
        csv += "," + format_g17(res.d_steps[i]);
        csv += "," + (i == 0 ? std::string("") : format_g17(res.ratios[i - 1]));
        csv += "\n";
    }
    write_text_file(path, csv);
}

} // namespace perron
