// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "calmkit/cone.hpp"
#include "calmkit/corpus.hpp"
#include "calmkit/perturbation.hpp"
#include "calmkit/report.hpp"
#include "calmkit/rng.hpp"

namespace {

// exit codes: 0 ok, 1 usage, 2 parse, 3 internal inconsistency,
// 4 fails-with-certificate under --strict
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitInconsistency = 3;
constexpr int kExitStrictFails = 4;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int run_selfcheck() {
  using namespace calmkit;
  int failures = 0;
  auto report = [&](const std::string& what, bool ok) {
    std::printf("%-52s %s\n", what.c_str(), ok ? "pass" : "FAIL");
    if (!ok) ++failures;
  };

  try {
    Rng rng(2026);
    std::vector<ConeBlock> kinds = {ConeBlock::zero(3), ConeBlock::orthant_nonpos(6),
                                    ConeBlock::orthant_nonneg(4),
                                    ConeBlock::second_order(4), ConeBlock::psd(3)};
    bool moreau_ok = true, roundtrip_ok = true;
    for (const ConeBlock& blk : kinds) {
      ProductCone k({blk});
      for (int t = 0; t < 200; ++t) {
        Vector z = 2.0 * rng.gaussian_vector(k.total_dim());
        Vector p = k.project(z);
        Vector q = k.project_polar(z);
        if ((z - p - q).norm() > 1e-9 * (1.0 + z.norm())) moreau_ok = false;
        Vector w = 2.0 * rng.gaussian_vector(k.total_dim());
        Vector dy = proj_dirderiv(k, z, w);
        if (!normal_graph_deriv_contains(k, p, z - p, dy, w - dy)) roundtrip_ok = false;
      }
    }
    report("cone calculus: Moreau decomposition", moreau_ok);
    report("cone calculus: graphical-derivative round trip", roundtrip_ok);

    for (const std::string& name : corpus::names()) {
      ParsedProblem pp = parse_problem_json(corpus::problem_json(name), name);
      report("corpus " + name + ": derivative selfcheck", pp.selfcheck.pass);
      bool points_ok = true;
      for (const NamedPoint& np : pp.points) points_ok &= np.valid;
      report("corpus " + name + ": KKT points validate", points_ok);
      bool reverse_ok = true;
      Rng prng(7 + static_cast<std::uint64_t>(pp.program.n));
      for (int t = 0; t < 500; ++t) {
        Vector x = prng.gaussian_vector(pp.program.n);
        Vector lam = prng.gaussian_vector(pp.program.m());
        ReversePerturbation rp = reverse_perturbation(pp.program, x, lam);
        if (rp.residual > 1e-9 * (1.0 + x.norm() + lam.norm())) reverse_ok = false;
      }
      report("corpus " + name + ": reverse-perturbation identity", reverse_ok);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "selfcheck aborted: %s\n", e.what());
    return kExitInconsistency;
  }
  return failures == 0 ? kExitOk : kExitInconsistency;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calmkit: stability diagnostics for KKT solution mappings of conic programs"};
  app.require_subcommand(1);

  auto* analyze = app.add_subcommand("analyze", "run analyses on a problem file");
  std::string file, point, analyses_csv, radii_csv, format = "text";
  bool all = false, strict = false, serial = false, direct_sampling = false;
  std::uint64_t seed = 0;
  int samples = 10000, starts = 64, probe_samples = 500;
  double tol_fail = 1e-8, tol_crit = 1e-7, tol_den = 1e-12;
  double growth_threshold = 5.0, sosc_margin = 1e-8, ri_margin = 1e-6;
  analyze->add_option("file", file, "problem file (JSON)")->required();
  analyze->add_option("--point", point, "point name (required unless the file has one point)");
  analyze->add_option("--analyses", analyses_csv, "comma-separated list of analyses");
  analyze->add_flag("--all", all, "run every analysis");
  analyze->add_option("--seed", seed, "base seed for all randomness");
  analyze->add_option("--radii", radii_csv, "probe radii, comma-separated, decreasing");
  analyze->add_option("--samples", samples, "probe samples per radius");
  analyze->add_option("--starts", starts, "multistart engine starts");
  analyze->add_option("--probe-samples", probe_samples, "sign-probe sample count");
  analyze->add_option("--tol-fail", tol_fail, "certificate residual tolerance");
  analyze->add_option("--tol-crit", tol_crit, "criticality residual tolerance");
  analyze->add_option("--tol-den", tol_den, "probe denominator floor");
  analyze->add_option("--growth-threshold", growth_threshold,
                      "per-decade growth that classifies a probe as diverging");
  analyze->add_option("--sosc-margin", sosc_margin, "second-order margin band");
  analyze->add_option("--ri-margin", ri_margin, "relative-interior facial margin");
  analyze->add_option("--format", format, "text|json")->check(CLI::IsMember({"text", "json"}));
  analyze->add_flag("--strict", strict, "nonzero exit on any Fails certificate");
  analyze->add_flag("--serial", serial, "disable OpenMP sampling");
  analyze->add_flag("--direct-sampling", direct_sampling,
                    "strong-calmness probe draws (a,b) directly and solves");

  auto* corpus_cmd = app.add_subcommand("corpus", "built-in example problems");
  auto* corpus_list = corpus_cmd->add_subcommand("list", "list problem names");
  std::string emit_dir;
  auto* corpus_emit = corpus_cmd->add_subcommand("emit", "write problem files to a directory");
  corpus_emit->add_option("dir", emit_dir, "output directory")->required();
  corpus_cmd->require_subcommand(1);

  auto* selfcheck = app.add_subcommand("selfcheck", "internal consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (selfcheck->parsed()) {
      return run_selfcheck();
    }
    if (corpus_cmd->parsed()) {
      if (corpus_list->parsed()) {
        for (const std::string& name : calmkit::corpus::names()) std::printf("%s\n", name.c_str());
      } else if (corpus_emit->parsed()) {
        for (const std::string& path : calmkit::corpus::emit(emit_dir))
          std::printf("%s\n", path.c_str());
      }
      return kExitOk;
    }

    calmkit::AnalysisRequest req;
    req.problem_path = file;
    req.point_name = point;
    if (all) {
      req.set_all();
    } else if (!analyses_csv.empty()) {
      req.analyses = split_list(analyses_csv);
    } else {
      std::fprintf(stderr, "analyze: pass --analyses or --all\n");
      return kExitUsage;
    }
    req.engine.seed = seed;
    req.engine.starts = starts;
    req.engine.tol_fail = tol_fail;
    req.engine.tol_crit = tol_crit;
    req.engine.probe_samples = probe_samples;
    req.probe.seed = seed;
    req.probe.samples = samples;
    req.probe.tol_den = tol_den;
    req.probe.growth_threshold = growth_threshold;
    if (!radii_csv.empty()) {
      req.probe.radii.clear();
      for (const std::string& r : split_list(radii_csv)) req.probe.radii.push_back(std::stod(r));
    }
    if (serial) {
      req.engine.exec = calmkit::Exec::Serial;
      req.probe.exec = calmkit::Exec::Serial;
    }
    req.sosc_margin = sosc_margin;
    req.ri_margin = ri_margin;
    req.direct_sampling = direct_sampling;
    req.strict = strict;

    calmkit::StabilityReport rep = calmkit::run_analysis(req);
    if (format == "json") {
      std::fputs(rep.json_text.c_str(), stdout);
    } else {
      std::fputs(calmkit::render_text_report(rep.json_text).c_str(), stdout);
    }
    if (rep.inconsistency) return kExitInconsistency;
    if (strict && rep.any_fails) return kExitStrictFails;
    return kExitOk;
  } catch (const calmkit::InconsistencyError& e) {
    std::fprintf(stderr, "internal inconsistency: %s\n", e.what());
    return kExitInconsistency;
  } catch (const calmkit::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParse;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}
