// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/report.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "json.hpp"

namespace calmkit {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& origin, const std::string& what) {
  throw Error("parse_problem", origin + ": " + what);
}

Vector parse_vector(const json& j, const std::string& origin, const std::string& field) {
  if (!j.is_array()) parse_fail(origin, field + " must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) parse_fail(origin, field + "[" + std::to_string(i) + "] is not a number");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix parse_matrix(const json& j, const std::string& origin, const std::string& field) {
  if (!j.is_array() || j.empty()) parse_fail(origin, field + " must be a nonempty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!j[static_cast<size_t>(i)].is_array() ||
        static_cast<Index>(j[static_cast<size_t>(i)].size()) != cols)
      parse_fail(origin, field + " rows have inconsistent lengths");
    for (Index k = 0; k < cols; ++k)
      m(i, k) = j[static_cast<size_t>(i)][static_cast<size_t>(k)].get<double>();
  }
  return m;
}

ConeBlock parse_block(const json& j, const std::string& origin, size_t idx) {
  const std::string field = "cone[" + std::to_string(idx) + "]";
  if (!j.contains("kind") || !j.contains("dim"))
    parse_fail(origin, field + " needs \"kind\" and \"dim\"");
  std::string kind = j["kind"].get<std::string>();
  Index dim = j["dim"].get<Index>();
  if (dim < 1) parse_fail(origin, field + ".dim must be >= 1");
  if (kind == "zero") return ConeBlock::zero(dim);
  if (kind == "orthant_nonpos") return ConeBlock::orthant_nonpos(dim);
  if (kind == "orthant_nonneg") return ConeBlock::orthant_nonneg(dim);
  if (kind == "soc") return ConeBlock::second_order(dim);
  if (kind == "psd") {
    Index order;
    try {
      order = svec_order(dim);
    } catch (const Error&) {
      parse_fail(origin, field + ".dim = " + std::to_string(dim) +
                             " is not a valid svec length n(n+1)/2");
    }
    return ConeBlock::psd(order);
  }
  parse_fail(origin, field + ".kind \"" + kind + "\" unknown (zero|orthant_nonpos|orthant_nonneg|soc|psd)");
}

Matrix symmetrized_or_fail(Matrix m, const std::string& origin, const std::string& field) {
  double asym = (m - m.transpose()).lpNorm<Eigen::Infinity>();
  if (asym > 1e-12 * (1.0 + m.lpNorm<Eigen::Infinity>()))
    parse_fail(origin, field + " is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  return 0.5 * (m + m.transpose());
}

}  // namespace

const NamedPoint& ParsedProblem::point(const std::string& point_name) const {
  for (const NamedPoint& p : points) {
    if (p.name == point_name) return p;
  }
  throw Error("ParsedProblem", "no point named '" + point_name + "' in " + name);
}

ParsedProblem parse_problem_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    parse_fail(origin, std::string("invalid JSON: ") + e.what());
  }

  for (const char* req : {"n", "cone", "f", "g", "points"}) {
    if (!j.contains(req)) parse_fail(origin, std::string("missing field \"") + req + "\"");
  }

  ParsedProblem out;
  out.name = j.value("name", origin);
  out.description = j.value("description", "");

  const Index n = j["n"].get<Index>();
  if (n < 1) parse_fail(origin, "n must be >= 1");

  std::vector<ConeBlock> blocks;
  for (size_t i = 0; i < j["cone"].size(); ++i)
    blocks.push_back(parse_block(j["cone"][i], origin, i));
  ProductCone cone(std::move(blocks));

  const json& jf = j["f"];
  if (!jf.contains("Q") || !jf.contains("c"))
    parse_fail(origin, "f needs \"Q\" and \"c\"");
  Matrix q = parse_matrix(jf["Q"], origin, "f.Q");
  Vector c = parse_vector(jf["c"], origin, "f.c");
  if (q.rows() != n || q.cols() != n || c.size() != n)
    parse_fail(origin, "f dimensions do not match n = " + std::to_string(n));
  q = symmetrized_or_fail(q, origin, "f.Q");
  double r = jf.value("r", 0.0);

  const Index m = static_cast<Index>(j["g"].size());
  if (m != cone.total_dim())
    parse_fail(origin, "g has " + std::to_string(m) + " rows but the cone has dimension " +
                           std::to_string(cone.total_dim()));
  std::vector<QuadraticEvaluator::Row> rows;
  for (Index i = 0; i < m; ++i) {
    const json& jr = j["g"][static_cast<size_t>(i)];
    const std::string field = "g[" + std::to_string(i) + "]";
    QuadraticEvaluator::Row row;
    if (jr.contains("A")) {
      row.a = parse_matrix(jr["A"], origin, field + ".A");
      if (row.a.rows() != n || row.a.cols() != n)
        parse_fail(origin, field + ".A must be " + std::to_string(n) + "x" + std::to_string(n));
      row.a = symmetrized_or_fail(row.a, origin, field + ".A");
    }
    if (!jr.contains("b")) parse_fail(origin, field + " needs \"b\"");
    row.b = parse_vector(jr["b"], origin, field + ".b");
    if (row.b.size() != n)
      parse_fail(origin, field + ".b must have length " + std::to_string(n));
    row.d = jr.value("d", 0.0);
    rows.push_back(std::move(row));
  }

  out.program.n = n;
  out.program.cone = std::move(cone);
  out.program.eval = std::make_shared<QuadraticEvaluator>(std::move(q), std::move(c), r, std::move(rows));

  // the evaluator must earn trust before any verdict: exact quadratics sit
  // at the rounding floor of the central-difference check
  Vector probe = Vector::Constant(n, 0.3);
  out.selfcheck = derivative_selfcheck(out.program, probe);
  if (!out.selfcheck.pass) {
    parse_fail(origin, "derivative selfcheck failed: max relative error " +
                           std::to_string(out.selfcheck.max_rel_err) + " at " + out.selfcheck.worst);
  }

  for (size_t i = 0; i < j["points"].size(); ++i) {
    const json& jp = j["points"][i];
    const std::string field = "points[" + std::to_string(i) + "]";
    if (!jp.contains("name") || !jp.contains("x") || !jp.contains("lambda"))
      parse_fail(origin, field + " needs \"name\", \"x\", \"lambda\"");
    NamedPoint pt;
    pt.name = jp["name"].get<std::string>();
    pt.x = parse_vector(jp["x"], origin, field + ".x");
    pt.lambda = parse_vector(jp["lambda"], origin, field + ".lambda");
    if (pt.x.size() != n)
      parse_fail(origin, field + ".x must have length " + std::to_string(n));
    if (pt.lambda.size() != out.program.m())
      parse_fail(origin, field + ".lambda must have length " + std::to_string(out.program.m()));
    try {
      KKTPoint kkt = validate_kkt_point(out.program, pt.x, pt.lambda);
      pt.valid = true;
      pt.residual = kkt.residual;
      pt.warnings = kkt.warnings;
    } catch (const Error& e) {
      pt.valid = false;
      pt.residual = kkt_residual_norm(out.program, pt.x, pt.lambda,
                                      Vector::Zero(n), Vector::Zero(out.program.m()));
      pt.warnings.push_back(e.what());
    }
    out.points.push_back(std::move(pt));
  }
  return out;
}

ParsedProblem parse_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("parse_problem", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem_json(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Analysis runner and report emission
// ---------------------------------------------------------------------------

namespace {

json jnum(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;  // infinities appear only with an explanatory flag next to them
}

json jvec(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json jverdict(const StabilityVerdict& v) {
  json j;
  j["status"] = to_string(v.status);
  j["mode"] = to_string(v.mode);
  j["method"] = v.method;
  j["residual"] = jnum(v.residual);
  j["seed"] = v.seed;
  j["detail"] = v.detail;
  j["witness"] = jvec(v.witness);
  return j;
}

json jratios(const RatioStats& st) {
  json j;
  j["probe"] = st.probe;
  j["seed"] = st.seed;
  j["diverging"] = st.diverging;
  j["growth_per_decade"] = jnum(st.growth_per_decade);
  j["growth_p90_per_decade"] = jnum(st.growth_p90_per_decade);
  json radii = json::array();
  for (const RadiusStats& rs : st.per_radius) {
    json r;
    r["radius"] = rs.radius;
    r["samples"] = rs.samples;
    r["skipped"] = rs.skipped;
    r["dropped"] = rs.dropped;
    r["max_ratio"] = jnum(rs.max_ratio);
    r["p99"] = jnum(rs.p99);
    r["p90"] = jnum(rs.p90);
    radii.push_back(r);
  }
  j["per_radius"] = radii;
  return j;
}

json jsign(const SignProbeResult& r) {
  json j;
  j["falsified"] = r.falsified;
  j["min_product"] = jnum(r.min_product);
  j["pairs_tested"] = r.pairs_tested;
  j["samples_skipped"] = r.samples_skipped;
  j["tilde"] = r.tilde;
  j["seed"] = r.seed;
  j["witness_xi"] = jvec(r.witness_xi);
  j["witness_zeta"] = jvec(r.witness_zeta);
  return j;
}

bool wants(const std::vector<std::string>& analyses, const std::string& name) {
  for (const std::string& a : analyses)
    if (a == name) return true;
  return false;
}

}  // namespace

const std::vector<std::string>& analysis_names() {
  static const std::vector<std::string> names = {
      "noncritical", "x-icalm",    "m-icalm", "skkt-icalm", "sosc",  "signcheck",
      "errorbound",  "strongcalm", "pseudo",  "equivalence", "ladder"};
  return names;
}

void AnalysisRequest::set_all() { analyses = analysis_names(); }

void AnalysisRequest::validate() const {
  for (const std::string& a : analyses) {
    bool known = false;
    for (const std::string& n : analysis_names())
      if (a == n) known = true;
    if (!known) throw Error("AnalysisRequest", "unknown analysis '" + a + "'");
  }
  if (analyses.empty()) throw Error("AnalysisRequest", "no analyses requested");
  probe.validate();
}

StabilityReport run_analysis(const AnalysisRequest& request) {
  request.validate();
  ParsedProblem pp = parse_problem(request.problem_path);

  std::string point_name = request.point_name;
  if (point_name.empty()) {
    if (pp.points.size() != 1)
      throw Error("run_analysis", pp.name + " has " + std::to_string(pp.points.size()) +
                                      " points; pick one with --point");
    point_name = pp.points.front().name;
  }
  const NamedPoint& np = pp.point(point_name);
  if (!np.valid) {
    throw Error("run_analysis", "point '" + point_name + "' failed KKT validation: " +
                                    (np.warnings.empty() ? "unknown" : np.warnings.front()));
  }
  KKTPoint pt = validate_kkt_point(pp.program, np.x, np.lambda);

  json root;
  root["problem"] = {{"name", pp.name},
                     {"path", request.problem_path},
                     {"description", pp.description}};
  root["point"] = {{"name", point_name},
                   {"x", jvec(np.x)},
                   {"lambda", jvec(np.lambda)},
                   {"residual", jnum(np.residual)},
                   {"warnings", np.warnings}};
  root["selfcheck"] = {{"max_rel_err", jnum(pp.selfcheck.max_rel_err)},
                       {"pass", pp.selfcheck.pass}};
  root["seed"] = request.engine.seed;
  root["tolerances"] = {{"tol_fail", request.engine.tol_fail},
                        {"tol_crit", request.engine.tol_crit},
                        {"tol_den", request.probe.tol_den},
                        {"growth_threshold", request.probe.growth_threshold},
                        {"sosc_margin", request.sosc_margin},
                        {"ri_margin", request.ri_margin},
                        {"starts", request.engine.starts},
                        {"samples", request.probe.samples},
                        {"probe_samples", request.engine.probe_samples},
                        {"radii", request.probe.radii}};

  StabilityReport out;
  json an;
  const auto& req = request.analyses;

  if (wants(req, "noncritical")) {
    StabilityVerdict v = noncriticality_test(pp.program, pt, request.engine);
    an["noncritical"] = jverdict(v);
    out.any_fails |= v.status == VerdictStatus::Fails;
  }
  if (wants(req, "x-icalm")) {
    StabilityVerdict v = x_isolated_calmness_test(pp.program, pt, request.engine);
    an["x-icalm"] = jverdict(v);
    out.any_fails |= v.status == VerdictStatus::Fails;
  }
  if (wants(req, "m-icalm")) {
    StabilityVerdict v = m_isolated_calmness_test(pp.program, pt, request.engine);
    an["m-icalm"] = jverdict(v);
    out.any_fails |= v.status == VerdictStatus::Fails;
  }
  if (wants(req, "skkt-icalm")) {
    SkktVerdict v = skkt_isolated_calmness_test(pp.program, pt, request.engine);
    json j;
    j["direct"] = jverdict(v.direct);
    j["m_isolated"] = jverdict(v.m_isolated);
    j["noncritical"] = jverdict(v.noncritical);
    j["routes_comparable"] = v.routes_comparable;
    j["routes_agree"] = v.routes_agree;
    an["skkt-icalm"] = j;
    out.any_fails |= v.direct.status == VerdictStatus::Fails;
  }
  if (wants(req, "sosc")) {
    SoscResult r = sosc_test(pp.program, pt, request.engine, request.sosc_margin);
    json j;
    j["status"] = to_string(r.status);
    j["min_value"] = jnum(r.min_value);
    j["vacuous"] = r.vacuous;
    j["feasibility"] = jnum(r.feasibility);
    j["witness"] = jvec(r.witness);
    j["seed"] = r.seed;
    j["detail"] = r.detail;
    an["sosc"] = j;
    out.any_fails |= r.status == VerdictStatus::Fails;
  }
  if (wants(req, "signcheck")) {
    SignProbeResult g = sigma_gamma_sign_probe(pp.program, pt, request.engine, false);
    SignProbeResult gt = sigma_gamma_sign_probe(pp.program, pt, request.engine, true);
    an["signcheck"] = {{"gamma", jsign(g)}, {"gamma_tilde", jsign(gt)}};
    out.any_fails |= g.falsified || gt.falsified;
  }

  MultiplierSetRef ref = make_multiplier_ref(pp.program, pt);

  // the equivalence experiment subsumes the three point probes and the
  // multiplier-calmness probe; reuse its results when both are requested
  std::optional<EquivalenceReport> equiv;
  if (wants(req, "equivalence")) {
    equiv = equivalence_experiment(ref, request.probe);
  }
  auto probe_or_cached = [&](const std::string& name) -> RatioStats {
    if (equiv) {
      if (name == "errorbound") return equiv->error_bound;
      if (name == "strongcalm" && !request.direct_sampling) return equiv->strong_calmness;
      if (name == "pseudo") return equiv->pseudo_isolated;
    }
    if (name == "errorbound") return error_bound_probe(ref, request.probe);
    if (name == "strongcalm")
      return strong_calmness_probe(ref, request.probe, request.direct_sampling);
    return pseudo_isolated_probe(ref, request.probe);
  };

  if (wants(req, "errorbound")) an["errorbound"] = jratios(probe_or_cached("errorbound"));
  if (wants(req, "strongcalm")) an["strongcalm"] = jratios(probe_or_cached("strongcalm"));
  if (wants(req, "pseudo")) an["pseudo"] = jratios(probe_or_cached("pseudo"));

  if (equiv) {
    json j;
    j["error_bound"] = jratios(equiv->error_bound);
    j["strong_calmness"] = jratios(equiv->strong_calmness);
    j["pseudo_isolated"] = jratios(equiv->pseudo_isolated);
    j["m_calmness"] = jratios(equiv->m_calmness);
    j["error_bound_equiv_ok"] = equiv->error_bound_equiv_ok;
    j["decomposition_equiv_ok"] = equiv->decomposition_equiv_ok;
    j["detail"] = equiv->detail;
    an["equivalence"] = j;
    if (!equiv->error_bound_equiv_ok || !equiv->decomposition_equiv_ok) {
      out.inconsistency = true;
    }
  }
  if (wants(req, "ladder")) {
    LadderReport lr = strong_calmness_sufficient(pp.program, pt, request.engine,
                                                 request.probe, request.ri_margin);
    json links = json::array();
    for (const LadderLink& l : lr.links) {
      links.push_back({{"name", l.name}, {"ok", l.ok}, {"heuristic", l.heuristic}, {"note", l.note}});
    }
    an["ladder"] = {{"links", links}, {"sufficient", lr.sufficient}, {"broken_at", lr.broken_at}};
  }

  root["analyses"] = an;
  root["consistency"] = {{"equivalence_ok", !out.inconsistency}};
  out.json_text = root.dump(2) + "\n";
  return out;
}

std::string render_text_report(const std::string& json_text) {
  json j = json::parse(json_text);
  std::ostringstream os;
  os << "problem : " << j["problem"]["name"].get<std::string>() << "\n";
  os << "point   : " << j["point"]["name"].get<std::string>()
     << "  (residual " << j["point"]["residual"].dump() << ")\n";
  os << "seed    : " << j["seed"].dump() << "\n";
  os << "\n";
  os << "analysis        verdict        key figures\n";
  os << "--------------- -------------- ----------------------------------------\n";
  const json& an = j["analyses"];
  auto line = [&](const std::string& name, const std::string& verdict,
                  const std::string& fig) {
    os << name;
    for (size_t i = name.size(); i < 16; ++i) os << ' ';
    os << verdict;
    for (size_t i = verdict.size(); i < 15; ++i) os << ' ';
    os << fig << "\n";
  };
  for (auto it = an.begin(); it != an.end(); ++it) {
    const std::string& name = it.key();
    const json& v = it.value();
    if (name == "skkt-icalm") {
      line(name, v["direct"]["status"].get<std::string>(),
           std::string("routes_agree=") + (v["routes_agree"].get<bool>() ? "yes" : "no"));
    } else if (name == "sosc") {
      line(name, v["status"].get<std::string>(),
           "min_value=" + v["min_value"].dump() +
               (v["vacuous"].get<bool>() ? " (vacuous)" : ""));
    } else if (name == "signcheck") {
      bool f = v["gamma"]["falsified"].get<bool>();
      bool ft = v["gamma_tilde"]["falsified"].get<bool>();
      line(name, (f || ft) ? "falsified" : "not-falsified",
           "min_product=" + v["gamma"]["min_product"].dump());
    } else if (name == "errorbound" || name == "strongcalm" || name == "pseudo") {
      line(name, v["diverging"].get<bool>() ? "diverging" : "bounded",
           "growth/decade=" + v["growth_per_decade"].dump() +
               " max=" + v["per_radius"].back()["max_ratio"].dump());
    } else if (name == "equivalence") {
      bool ok = v["error_bound_equiv_ok"].get<bool>() && v["decomposition_equiv_ok"].get<bool>();
      line(name, ok ? "consistent" : "VIOLATION", v["detail"].get<std::string>());
    } else if (name == "ladder") {
      line(name, v["sufficient"].get<bool>() ? "sufficient" : "broken",
           v["sufficient"].get<bool>() ? "all links hold (heuristic links flagged)"
                                       : "broken at " + v["broken_at"].get<std::string>());
    } else {
      line(name, v["status"].get<std::string>(),
           "method=" + v["method"].get<std::string>() + " residual=" + v["residual"].dump());
    }
  }
  return os.str();
}

}  // namespace calmkit
