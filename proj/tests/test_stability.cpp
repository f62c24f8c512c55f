#include <cmath>

#include "calmkit/multiplier.hpp"
#include "calmkit/rng.hpp"
#include "calmkit/stability.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace calmkit;
using calmkit::testing::load_point;
using calmkit::testing::random_polyhedral_instance;

namespace {

EngineConfig engine(std::uint64_t seed = 3) {
  EngineConfig cfg;
  cfg.seed = seed;
  return cfg;
}

ProbeConfig fast_probe(std::uint64_t seed = 1) {
  ProbeConfig cfg;
  cfg.samples = 400;
  cfg.seed = seed;
  return cfg;
}

/// min 1/2 x^2 s.t. x <= 0 at (0, 0): the Sigma/Gamma sign condition is
/// violated with product exactly -1 at xi = -1.
calmkit::testing::LoadedPoint indefinite_coupling_instance() {
  Matrix q = Matrix::Constant(1, 1, 1.0);
  Vector c = Vector::Zero(1);
  std::vector<QuadraticEvaluator::Row> rows(1);
  rows[0].a = Matrix::Zero(1, 1);
  rows[0].b = Vector::Constant(1, 1.0);
  rows[0].d = 0.0;
  ConicProgram prog;
  prog.n = 1;
  prog.cone = ProductCone({ConeBlock::orthant_nonpos(1)});
  prog.eval = std::make_shared<QuadraticEvaluator>(q, c, 0.0, rows);
  KKTPoint pt = validate_kkt_point(prog, Vector::Zero(1), Vector::Zero(1));
  return {prog, pt};
}

}  // namespace

TEST_CASE("noncriticality verdicts on the corpus") {
  {
    auto [prog, pt] = load_point("p1", "critical");
    StabilityVerdict v = noncriticality_test(prog, pt, engine());
    REQUIRE(v.status == VerdictStatus::Fails);
    CHECK(v.method == "face-enum");
    CHECK(std::abs(v.witness.head(1).norm() - 1.0) <= 1e-9);
    CHECK(v.residual <= 1e-8);
  }
  {
    auto [prog, pt] = load_point("p1", "noncritical");
    CHECK(noncriticality_test(prog, pt, engine()).status == VerdictStatus::Holds);
  }
  for (const char* name : {"lam0", "lam1", "lam10"}) {
    auto [prog, pt] = load_point("p2", name);
    CHECK(noncriticality_test(prog, pt, engine()).status == VerdictStatus::Holds);
  }
  {
    auto [prog, pt] = load_point("p3", "unique");
    StabilityVerdict v = noncriticality_test(prog, pt, engine());
    CHECK(v.status == VerdictStatus::Holds);
    CHECK(v.method == "multistart");
  }
  {
    auto [prog, pt] = load_point("p4", "degenerate");
    CHECK(noncriticality_test(prog, pt, engine()).status == VerdictStatus::Holds);
  }
}

TEST_CASE("x-isolated calmness verdicts") {
  {
    auto [prog, pt] = load_point("p1", "noncritical");
    CHECK(x_isolated_calmness_test(prog, pt, engine()).status == VerdictStatus::Holds);
  }
  {
    auto [prog, pt] = load_point("p1", "critical");
    StabilityVerdict v = x_isolated_calmness_test(prog, pt, engine());
    REQUIRE(v.status == VerdictStatus::Fails);
    CHECK(v.residual <= 1e-8);
  }
  {
    auto [prog, pt] = load_point("p3", "unique");
    CHECK(x_isolated_calmness_test(prog, pt, engine()).status == VerdictStatus::Holds);
  }
}

TEST_CASE("skkt isolated calmness: direct decision and the conjunction route") {
  {
    auto [prog, pt] = load_point("p3", "unique");
    SkktVerdict v = skkt_isolated_calmness_test(prog, pt, engine());
    CHECK(v.direct.status == VerdictStatus::Holds);
    CHECK(v.routes_comparable);
    CHECK(v.routes_agree);
  }
  {
    auto [prog, pt] = load_point("p1", "noncritical");
    SkktVerdict v = skkt_isolated_calmness_test(prog, pt, engine());
    CHECK(v.direct.status == VerdictStatus::Fails);
    CHECK(v.m_isolated.status == VerdictStatus::Fails);
    CHECK(v.noncritical.status == VerdictStatus::Holds);
    CHECK(v.routes_agree);
  }
  {
    auto [prog, pt] = load_point("p1", "critical");
    SkktVerdict v = skkt_isolated_calmness_test(prog, pt, engine());
    CHECK(v.direct.status == VerdictStatus::Fails);
    CHECK(v.m_isolated.status == VerdictStatus::Fails);
    CHECK(v.noncritical.status == VerdictStatus::Fails);
    CHECK(v.routes_agree);
  }
  {
    auto [prog, pt] = load_point("p4", "degenerate");
    SkktVerdict v = skkt_isolated_calmness_test(prog, pt, engine());
    CHECK(v.direct.status == VerdictStatus::Fails);
    CHECK(v.noncritical.status == VerdictStatus::Holds);
    CHECK(v.routes_agree);
  }
}

TEST_CASE("second-order sufficient condition") {
  {
    auto [prog, pt] = load_point("p2", "lam0");
    SoscResult r = sosc_test(prog, pt, engine());
    CHECK(r.status == VerdictStatus::Holds);
    CHECK(r.min_value == doctest::Approx(2.0).epsilon(1e-6));
  }
  {
    auto [prog, pt] = load_point("p1", "critical");
    SoscResult r = sosc_test(prog, pt, engine());
    CHECK(r.status == VerdictStatus::Inconclusive);  // value exactly zero
    CHECK(std::abs(r.min_value) <= 1e-8);
  }
  {
    auto [prog, pt] = load_point("p1", "noncritical");
    SoscResult r = sosc_test(prog, pt, engine());
    CHECK(r.status == VerdictStatus::Holds);
    CHECK(r.min_value == doctest::Approx(3.0).epsilon(1e-6));
  }
  {
    auto [prog, pt] = load_point("p3", "unique");
    SoscResult r = sosc_test(prog, pt, engine());
    CHECK(r.status == VerdictStatus::Holds);
    CHECK(r.vacuous);  // the critical cone preimage is trivial
  }
}

TEST_CASE("sigma/gamma sign probe") {
  {
    auto [prog, pt] = load_point("p2", "lam0");
    SignProbeResult r = sigma_gamma_sign_probe(prog, pt, engine());
    CHECK_FALSE(r.falsified);
  }
  {
    auto [prog, pt] = load_point("p3", "unique");
    SignProbeResult r = sigma_gamma_sign_probe(prog, pt, engine());
    CHECK_FALSE(r.falsified);
  }
  {
    auto lp = indefinite_coupling_instance();
    SignProbeResult r = sigma_gamma_sign_probe(lp.prog, lp.point, engine());
    REQUIRE(r.falsified);
    CHECK(r.min_product == doctest::Approx(-1.0).epsilon(1e-6));
    // the witness pair satisfies the defining equation and memberships
    Matrix hess = lagrangian_hessian(lp.prog, lp.point.x, lp.point.lambda);
    Matrix adj = lp.prog.eval->jac_g(lp.point.x).transpose();
    Vector h = lp.prog.eval->jac_g(lp.point.x) * r.witness_xi;
    Vector sigma_res = hess * r.witness_xi +
                       adj * (r.witness_zeta + 0.5 * sigma_form_gradient(lp.point.face, h));
    CHECK(sigma_res.norm() <= 1e-8);
    CHECK(critical_cone_violation(lp.point.face, h) <= 1e-8);
    CHECK(critical_polar_violation(lp.point.face, r.witness_zeta) <= 1e-8);
    // the tilde variant searches a larger set, so it is falsified as well
    SignProbeResult rt = sigma_gamma_sign_probe(lp.prog, lp.point, engine(), true);
    CHECK(rt.falsified);
  }
}

TEST_CASE("sufficient-condition ladder") {
  {
    auto [prog, pt] = load_point("p3", "unique");
    LadderReport rep = strong_calmness_sufficient(prog, pt, engine(), fast_probe());
    CHECK(rep.sufficient);
    CHECK(rep.broken_at.empty());
  }
  {
    auto [prog, pt] = load_point("p1", "critical");
    LadderReport rep = strong_calmness_sufficient(prog, pt, engine(), fast_probe());
    CHECK_FALSE(rep.sufficient);
    CHECK(rep.broken_at == "noncritical");
  }
  {
    auto [prog, pt] = load_point("p1", "noncritical");
    LadderReport rep = strong_calmness_sufficient(prog, pt, engine(), fast_probe());
    CHECK_FALSE(rep.sufficient);
    CHECK(rep.broken_at == "subregularity");
  }
  {
    auto [prog, pt] = load_point("p4", "degenerate");
    LadderReport rep = strong_calmness_sufficient(prog, pt, engine(), fast_probe());
    CHECK(rep.sufficient);
  }
}

TEST_CASE("residual is positively homogeneous of degree one") {
  Rng rng(41);
  for (const char* prob : {"p1", "p2", "p3", "p4"}) {
    auto pp = calmkit::testing::load_problem(prob);
    const NamedPoint& np = pp.points.front();
    KKTPoint pt = validate_kkt_point(pp.program, np.x, np.lambda);
    for (SystemMode mode : {SystemMode::Noncritical, SystemMode::XIsolated,
                            SystemMode::MIsolated, SystemMode::SkktIsolated}) {
      HomogeneousSystem sys = make_system(pp.program, pt, mode);
      Vector u = rng.gaussian_vector(sys.unknown_dim());
      Vector r1 = sys.residual(u);
      for (double t : {0.5, 2.0, 7.0}) {
        Vector rt = sys.residual(t * u);
        CHECK((rt - t * r1).norm() <= 1e-10 * (1.0 + t * r1.norm()));
      }
    }
  }
}

TEST_CASE("face-enum and multistart agree on random polyhedral instances") {
  int fails = 0, holds = 0;
  for (std::uint64_t inst_seed = 0; inst_seed < 12; ++inst_seed) {
    auto inst = random_polyhedral_instance(1000 + inst_seed);
    KKTPoint pt = validate_kkt_point(inst.prog, inst.x, inst.lambda);
    EngineConfig fe = engine(5);
    fe.method = DecisionMethod::FaceEnum;
    EngineConfig ms = engine(5);
    ms.method = DecisionMethod::Multistart;
    StabilityVerdict vfe = noncriticality_test(inst.prog, pt, fe);
    StabilityVerdict vms = noncriticality_test(inst.prog, pt, ms);
    REQUIRE(vfe.status != VerdictStatus::Inconclusive);
    CHECK(vfe.status == vms.status);
    if (vfe.status == VerdictStatus::Fails) {
      ++fails;
      CHECK(vfe.residual <= 1e-8);
      CHECK(vms.residual <= 1e-8);
    } else {
      ++holds;
    }
  }
  // the generator must exercise both outcomes
  CHECK(fails > 0);
  CHECK(holds > 0);
}

TEST_CASE("face-enum on a non-polyhedral cone is an error") {
  auto [prog, pt] = load_point("p3", "unique");
  EngineConfig cfg = engine();
  cfg.method = DecisionMethod::FaceEnum;
  CHECK_THROWS_AS(noncriticality_test(prog, pt, cfg), Error);
}
