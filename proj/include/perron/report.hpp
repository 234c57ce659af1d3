#pragma once

#include "perron/cocycle.hpp"
#include "perron/corollaries.hpp"
#include "perron/driving.hpp"
#include "perron/psi.hpp"
#include "perron/solver.hpp"

#include <json.hpp>

#include <string>

namespace perron {

// Reports keep insertion order so identical runs serialize byte-identically.
using Json = nlohmann::ordered_json;

Json to_json(const FlowReport& rep);
Json to_json(const SplittingReport& rep);
Json to_json(const DichotomyReport& rep);
Json to_json(const DecayReport& rep);
Json to_json(const SigmaTau& st);
Json to_json(const MNConstants& mn);
Json to_json(const TemperednessReport& rep);
Json to_json(const HypothesisReport& rep);
Json to_json(const SolveResult& res); // scalars and traces; tables go to CSV
Json to_json(const InvarianceReport& rep);
Json to_json(const GrowthReport& rep);

std::string format_g17(double v);

void write_text_file(const std::string& path, const std::string& content);

// One row per (fiber, grid node): fiber_index, xi..., phi...
// Covers fibers 0..reported_fibers; 17 significant digits.
void write_phi_csv(const std::string& path, const GraphFunction& gf);

// Per-iteration trace: iteration, d1_step, d2_step, d_step, ratio.
void write_trace_csv(const std::string& path, const SolveResult& res);

} // namespace perron
