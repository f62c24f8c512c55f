#include <cstdio>
#include <filesystem>
#include <fstream>

#include "calmkit/corpus.hpp"
#include "calmkit/multiplier.hpp"
#include "calmkit/report.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

#ifndef CALMKIT_SOURCE_DIR
#define CALMKIT_SOURCE_DIR "."
#endif

using namespace calmkit;
using nlohmann::json;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "calmkit_tests";
  std::filesystem::create_directories(dir);
  std::filesystem::path p = dir / name;
  std::ofstream out(p);
  out << text;
  return p.string();
}

AnalysisRequest fast_request(const std::string& path, const std::string& point) {
  AnalysisRequest req;
  req.problem_path = path;
  req.point_name = point;
  req.probe.samples = 400;
  req.engine.seed = 7;
  req.probe.seed = 7;
  return req;
}

}  // namespace

TEST_CASE("corpus parses with expected points") {
  ParsedProblem p1 = calmkit::testing::load_problem("p1");
  CHECK(p1.program.n == 1);
  CHECK(p1.points.size() == 2);
  CHECK(p1.point("critical").lambda[0] == doctest::Approx(-0.5));
  CHECK(p1.point("noncritical").lambda[0] == doctest::Approx(1.0));
  CHECK(p1.point("critical").valid);

  ParsedProblem p4 = calmkit::testing::load_problem("p4");
  CHECK(p4.program.m() == 3);
  CHECK(p4.program.cone.block(0).kind == ConeKind::Psd);
  CHECK(p4.program.cone.block(0).order == 2);
}

TEST_CASE("parse errors name the offending field") {
  SUBCASE("constraint row count must match the cone dimension") {
    std::string bad = R"({"n":1,"cone":[{"kind":"orthant_nonpos","dim":2}],
      "f":{"Q":[[1.0]],"c":[0.0]},
      "g":[{"b":[1.0]}],
      "points":[]})";
    CHECK_THROWS_WITH_AS(parse_problem_json(bad, "bad1"),
                         doctest::Contains("1 rows but the cone has dimension 2"), Error);
  }
  SUBCASE("psd dim must be a triangular number") {
    std::string bad = R"({"n":1,"cone":[{"kind":"psd","dim":4}],
      "f":{"Q":[[1.0]],"c":[0.0]},
      "g":[{"b":[1.0]},{"b":[0.0]},{"b":[0.0]},{"b":[0.0]}],
      "points":[]})";
    CHECK_THROWS_WITH_AS(parse_problem_json(bad, "bad2"),
                         doctest::Contains("svec length"), Error);
  }
  SUBCASE("asymmetric matrices beyond tolerance are rejected") {
    std::string bad = R"({"n":2,"cone":[{"kind":"zero","dim":1}],
      "f":{"Q":[[1.0,0.5],[0.0,1.0]],"c":[0.0,0.0]},
      "g":[{"b":[1.0,0.0]}],
      "points":[]})";
    CHECK_THROWS_WITH_AS(parse_problem_json(bad, "bad3"),
                         doctest::Contains("not symmetric"), Error);
  }
  SUBCASE("unknown cone kind") {
    std::string bad = R"({"n":1,"cone":[{"kind":"exp","dim":3}],
      "f":{"Q":[[1.0]],"c":[0.0]},
      "g":[{"b":[1.0]},{"b":[0.0]},{"b":[0.0]}],
      "points":[]})";
    CHECK_THROWS_WITH_AS(parse_problem_json(bad, "bad4"),
                         doctest::Contains("unknown"), Error);
  }
  SUBCASE("invalid points are kept with a warning, not dropped") {
    std::string text = corpus::problem_json("p1");
    json j = json::parse(text);
    j["points"].push_back({{"name", "offside"}, {"x", {0.1}}, {"lambda", {-0.5}}});
    ParsedProblem pp = parse_problem_json(j.dump(), "p1x");
    const NamedPoint& np = pp.point("offside");
    CHECK_FALSE(np.valid);
    CHECK(np.residual > 0.0);
    CHECK_FALSE(np.warnings.empty());
  }
}

TEST_CASE("unknown analysis names are rejected at request validation") {
  AnalysisRequest req;
  req.problem_path = "whatever";
  req.analyses = {"noncritical", "nonsense"};
  CHECK_THROWS_WITH_AS(req.validate(), doctest::Contains("nonsense"), Error);
}

TEST_CASE("analysis report: corpus snapshot for p1") {
  std::string path = write_temp("p1.json", corpus::problem_json("p1"));
  {
    AnalysisRequest req = fast_request(path, "critical");
    req.analyses = {"noncritical", "x-icalm", "m-icalm", "skkt-icalm", "errorbound", "ladder"};
    StabilityReport rep = run_analysis(req);
    json j = json::parse(rep.json_text);
    CHECK(j["analyses"]["noncritical"]["status"] == "fails");
    CHECK(j["analyses"]["noncritical"]["method"] == "face-enum");
    CHECK(j["analyses"]["x-icalm"]["status"] == "fails");
    CHECK(j["analyses"]["m-icalm"]["status"] == "fails");
    CHECK(j["analyses"]["skkt-icalm"]["direct"]["status"] == "fails");
    CHECK(j["analyses"]["skkt-icalm"]["routes_agree"] == true);
    CHECK(j["analyses"]["errorbound"]["diverging"] == true);
    CHECK(j["analyses"]["ladder"]["sufficient"] == false);
    CHECK(j["analyses"]["ladder"]["broken_at"] == "noncritical");
    CHECK(rep.any_fails);
    CHECK_FALSE(rep.inconsistency);
  }
  {
    AnalysisRequest req = fast_request(path, "noncritical");
    req.analyses = {"noncritical", "skkt-icalm", "errorbound"};
    StabilityReport rep = run_analysis(req);
    json j = json::parse(rep.json_text);
    CHECK(j["analyses"]["noncritical"]["status"] == "holds");
    CHECK(j["analyses"]["skkt-icalm"]["direct"]["status"] == "fails");  // M not isolated
    CHECK(j["analyses"]["errorbound"]["diverging"] == false);
  }
}

TEST_CASE("analysis report: corpus snapshot for p3 and p4") {
  {
    std::string path = write_temp("p3.json", corpus::problem_json("p3"));
    AnalysisRequest req = fast_request(path, "");  // unique point, name optional
    req.analyses = {"noncritical", "skkt-icalm", "equivalence", "ladder"};
    StabilityReport rep = run_analysis(req);
    json j = json::parse(rep.json_text);
    CHECK(j["point"]["name"] == "unique");
    CHECK(j["analyses"]["noncritical"]["status"] == "holds");
    CHECK(j["analyses"]["skkt-icalm"]["direct"]["status"] == "holds");
    CHECK(j["analyses"]["equivalence"]["error_bound_equiv_ok"] == true);
    CHECK(j["analyses"]["equivalence"]["decomposition_equiv_ok"] == true);
    CHECK(j["analyses"]["ladder"]["sufficient"] == true);
    CHECK_FALSE(rep.inconsistency);
  }
  {
    std::string path = write_temp("p4.json", corpus::problem_json("p4"));
    AnalysisRequest req = fast_request(path, "degenerate");
    req.analyses = {"noncritical", "m-icalm", "sosc"};
    StabilityReport rep = run_analysis(req);
    json j = json::parse(rep.json_text);
    CHECK(j["analyses"]["noncritical"]["status"] == "holds");
    CHECK(j["analyses"]["m-icalm"]["status"] == "fails");
  }
}

TEST_CASE("machine report round trip: re-parse reproduces every field") {
  std::string path = write_temp("p2.json", corpus::problem_json("p2"));
  AnalysisRequest req = fast_request(path, "lam1");
  req.analyses = {"noncritical", "sosc", "errorbound", "signcheck"};
  StabilityReport rep = run_analysis(req);
  json j = json::parse(rep.json_text);
  std::string re_emitted = j.dump(2) + "\n";
  CHECK(re_emitted == rep.json_text);
  CHECK(json::parse(re_emitted) == j);
}

TEST_CASE("determinism: identical requests produce byte-identical reports") {
  std::string path = write_temp("p4det.json", corpus::problem_json("p4"));
  AnalysisRequest req = fast_request(path, "degenerate");
  req.set_all();
  req.probe.samples = 300;
  StabilityReport a = run_analysis(req);
  StabilityReport b = run_analysis(req);
  CHECK(a.json_text == b.json_text);
  // and the serial path agrees with the parallel one
  AnalysisRequest sreq = req;
  sreq.engine.exec = Exec::Serial;
  sreq.probe.exec = Exec::Serial;
  StabilityReport c = run_analysis(sreq);
  CHECK(a.json_text == c.json_text);
}

TEST_CASE("text rendering mentions every requested analysis") {
  std::string path = write_temp("p1t.json", corpus::problem_json("p1"));
  AnalysisRequest req = fast_request(path, "critical");
  req.analyses = {"noncritical", "errorbound"};
  StabilityReport rep = run_analysis(req);
  std::string text = render_text_report(rep.json_text);
  CHECK(text.find("noncritical") != std::string::npos);
  CHECK(text.find("errorbound") != std::string::npos);
  CHECK(text.find("fails") != std::string::npos);
  CHECK(text.find("diverging") != std::string::npos);
}

TEST_CASE("corpus emit writes parseable files") {
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "calmkit_corpus_emit";
  std::filesystem::remove_all(dir);
  auto paths = corpus::emit(dir.string());
  CHECK(paths.size() == 4);
  for (const std::string& p : paths) {
    ParsedProblem pp = parse_problem(p);
    CHECK(pp.selfcheck.pass);
  }
}

TEST_CASE("shipped data files match the embedded corpus" * doctest::skip(false)) {
  // the repo carries data/corpus/*.json for direct CLI use; they must not
  // drift from what `calmkit corpus emit` writes
  std::filesystem::path repo_dir = std::filesystem::path(CALMKIT_SOURCE_DIR) / "data" / "corpus";
  if (!std::filesystem::exists(repo_dir)) return;  // out-of-repo build
  for (const std::string& name : corpus::names()) {
    std::ifstream in(repo_dir / (name + ".json"));
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == corpus::problem_json(name));
  }
}

TEST_CASE("full corpus verdict table") {
  // the expected verdict per point and analysis, as derived by hand:
  // columns: noncritical, m-icalm, skkt-direct
  struct Row {
    const char* prob;
    const char* point;
    VerdictStatus noncritical;
    VerdictStatus m_icalm;
    VerdictStatus skkt;
  };
  const VerdictStatus H = VerdictStatus::Holds, F = VerdictStatus::Fails;
  const std::vector<Row> table = {
      {"p1", "critical", F, F, F},    {"p1", "noncritical", H, F, F},
      {"p2", "lam0", H, F, F},        {"p2", "lam1", H, F, F},
      {"p2", "lam10", H, F, F},       {"p3", "unique", H, H, H},
      {"p4", "degenerate", H, F, F},
  };
  EngineConfig cfg;
  cfg.seed = 13;
  for (const Row& row : table) {
    CAPTURE(row.prob);
    CAPTURE(row.point);
    auto [prog, pt] = calmkit::testing::load_point(row.prob, row.point);
    CHECK(noncriticality_test(prog, pt, cfg).status == row.noncritical);
    CHECK(m_isolated_calmness_test(prog, pt, cfg).status == row.m_icalm);
    CHECK(skkt_isolated_calmness_test(prog, pt, cfg).direct.status == row.skkt);
  }
}

TEST_CASE("sosc minima across the p2 multipliers match the Lagrangian curvature") {
  // hess L = 2 + 2*lambda and the critical-cone preimage is the whole line
  for (auto [point, expected] : {std::pair<const char*, double>{"lam0", 2.0},
                                 {"lam1", 4.0},
                                 {"lam10", 22.0}}) {
    auto [prog, pt] = calmkit::testing::load_point("p2", point);
    SoscResult r = sosc_test(prog, pt);
    CHECK(r.status == VerdictStatus::Holds);
    CHECK(r.min_value == doctest::Approx(expected).epsilon(1e-6));
  }
}
