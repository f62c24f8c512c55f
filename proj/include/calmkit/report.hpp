// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "calmkit/perturbation.hpp"
#include "calmkit/problem.hpp"
#include "calmkit/stability.hpp"

namespace calmkit {

struct NamedPoint {
  std::string name;
  Vector x;
  Vector lambda;
  bool valid = false;           // passed validate_kkt_point
  double residual = 0;          // unperturbed KKT residual
  std::vector<std::string> warnings;
};

struct ParsedProblem {
  std::string name;
  std::string description;
  ConicProgram program;
  std::vector<NamedPoint> points;
  SelfcheckReport selfcheck;

  const NamedPoint& point(const std::string& name) const;
};

/// Parse and validate a problem file. Schema errors name the offending
/// field; the program must pass derivative_selfcheck. Points that fail KKT
/// validation are kept with valid = false (usable only by residual display).
ParsedProblem parse_problem(const std::string& path);
ParsedProblem parse_problem_json(const std::string& text,
                                 const std::string& origin = "<memory>");

/// Analysis names accepted by AnalysisRequest ("all" expands to every one).
const std::vector<std::string>& analysis_names();

struct AnalysisRequest {
  std::string problem_path;
  std::string point_name;                // empty: unique point of the file
  std::vector<std::string> analyses;     // validated against analysis_names()
  EngineConfig engine;
  ProbeConfig probe;
  double sosc_margin = 1e-8;
  double ri_margin = 1e-6;
  bool direct_sampling = false;          // strong-calmness probe variant
  bool strict = false;

  void set_all();
  void validate() const;  // unknown analysis names are rejected here
};

struct StabilityReport {
  std::string json_text;        // machine format, deterministic for a seed
  bool any_fails = false;       // some verdict carries a Fails certificate
  bool inconsistency = false;   // an equivalence truth table was violated
};

/// Run the requested analyses on one named point. Deterministic for a fixed
/// seed. Module errors surface with module and operation context.
StabilityReport run_analysis(const AnalysisRequest& request);

/// Render the machine report as a human-readable summary table.
std::string render_text_report(const std::string& json_text);

}  // namespace calmkit
