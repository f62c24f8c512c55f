#include <cmath>

#include "calmkit/perturbation.hpp"
#include "calmkit/rng.hpp"
#include "calmkit/stability.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace calmkit;
using calmkit::testing::load_point;

namespace {

ProbeConfig fast_probe(std::uint64_t seed = 1) {
  ProbeConfig cfg;
  cfg.samples = 500;
  cfg.seed = seed;
  return cfg;
}

Vector scal(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST_CASE("reverse perturbation examples") {
  ConicProgram p1 = calmkit::testing::load_problem("p1").program;
  {
    ReversePerturbation rp = reverse_perturbation(p1, scal(0.1), scal(1.0));
    CHECK(rp.b[0] == doctest::Approx(0.01));
    CHECK(rp.a[0] == doctest::Approx(0.302));
    CHECK(rp.lambda[0] == doctest::Approx(1.01));
    CHECK(rp.residual <= 1e-15);
  }
  {
    // an exact KKT point maps to the zero perturbation and itself
    ReversePerturbation rp = reverse_perturbation(p1, scal(0.0), scal(-0.5));
    CHECK(rp.a.norm() == 0.0);
    CHECK(rp.b.norm() == 0.0);
    CHECK(rp.residual == 0.0);
  }
  ConicProgram p2 = calmkit::testing::load_problem("p2").program;
  {
    ReversePerturbation rp = reverse_perturbation(p2, scal(0.1), scal(0.0));
    CHECK(rp.b[0] == doctest::Approx(0.01));
    CHECK(rp.a[0] == doctest::Approx(0.2 + 0.2 * 0.01));
    CHECK(rp.residual <= 1e-12);
  }
}

TEST_CASE("reverse perturbation is an exact identity on random pairs") {
  Rng rng(53);
  for (const char* name : {"p1", "p2", "p3", "p4"}) {
    ConicProgram prog = calmkit::testing::load_problem(name).program;
    for (int t = 0; t < 2000; ++t) {
      Vector x = 2.0 * rng.gaussian_vector(prog.n);
      Vector lam = 2.0 * rng.gaussian_vector(prog.m());
      ReversePerturbation rp = reverse_perturbation(prog, x, lam);
      CHECK(rp.residual <= 1e-9 * (1.0 + x.norm() + lam.norm()));
    }
  }
}

TEST_CASE("semismooth newton solves perturbed systems") {
  SUBCASE("p1: analytic solution x = sqrt(b), lambda = -1/2") {
    ConicProgram p1 = calmkit::testing::load_problem("p1").program;
    NewtonResult res = solve_perturbed_kkt(p1, scal(0.0), scal(0.01), scal(0.05), scal(1.0));
    REQUIRE(res.converged);
    CHECK(res.x[0] == doctest::Approx(0.1).epsilon(1e-8));
    CHECK(res.lambda[0] == doctest::Approx(-0.5).epsilon(1e-8));
    CHECK(kkt_residual_norm(p1, res.x, res.lambda, scal(0.0), scal(0.01)) <= 1e-10);
  }
  SUBCASE("zero perturbation from a KKT point returns immediately") {
    ConicProgram p1 = calmkit::testing::load_problem("p1").program;
    NewtonResult res = solve_perturbed_kkt(p1, scal(0.0), scal(0.0), scal(0.0), scal(-0.5));
    REQUIRE(res.converged);
    CHECK(res.iterations == 0);
  }
  SUBCASE("p3: perturbed objective, solution against the conic case analysis") {
    ConicProgram p3 = calmkit::testing::load_problem("p3").program;
    Vector a(2), b0 = Vector::Zero(2), x0 = Vector::Zero(2), l0(2);
    a << 0.01, 0.0;
    l0 << -1.0, 0.0;
    NewtonResult res = solve_perturbed_kkt(p3, a, b0, x0, l0);
    REQUIRE(res.converged);
    // hand solve: min x1 - 0.01 x1 over the cone: gradient (0.99, 0) must be
    // -lambda with lambda polar-interior, x stays at the apex
    CHECK(res.x.norm() <= 1e-9);
    CHECK(res.lambda[0] == doctest::Approx(-0.99).epsilon(1e-9));
    CHECK(kkt_residual_norm(p3, res.x, res.lambda, a, b0) <= 1e-10);
  }
  SUBCASE("solutions re-verify through kkt_residual") {
    Rng rng(7);
    for (const char* name : {"p2", "p4"}) {
      ConicProgram prog = calmkit::testing::load_problem(name).program;
      ParsedProblem pp = calmkit::testing::load_problem(name);
      const NamedPoint& np = pp.points.front();
      for (int t = 0; t < 20; ++t) {
        Vector a = 0.01 * rng.gaussian_vector(prog.n);
        Vector b = 0.01 * rng.gaussian_vector(prog.m());
        NewtonResult res = solve_perturbed_kkt(prog, a, b, np.x, np.lambda);
        if (res.converged) {
          CHECK(kkt_residual_norm(prog, res.x, res.lambda, a, b) <= 1e-10 * (1 + a.norm() + b.norm()));
        }
      }
    }
  }
}

TEST_CASE("error-bound probe separates the critical from the noncritical point") {
  {
    auto [prog, pt] = load_point("p1", "critical");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    RatioStats st = error_bound_probe(ref, fast_probe());
    CHECK(st.diverging);
    CHECK(st.growth_p90_per_decade >= 5.0);
  }
  {
    auto [prog, pt] = load_point("p1", "noncritical");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    RatioStats st = error_bound_probe(ref, fast_probe());
    CHECK_FALSE(st.diverging);
    // ratio concentrates near 1/3 at this point
    CHECK(st.per_radius.back().max_ratio <= 1.0);
  }
  {
    auto [prog, pt] = load_point("p2", "lam1");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    CHECK_FALSE(error_bound_probe(ref, fast_probe()).diverging);
  }
}

TEST_CASE("strong-calmness and pseudo-isolated probes") {
  {
    auto [prog, pt] = load_point("p1", "critical");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    CHECK(strong_calmness_probe(ref, fast_probe()).diverging);
    CHECK(pseudo_isolated_probe(ref, fast_probe()).diverging);
  }
  {
    auto [prog, pt] = load_point("p1", "noncritical");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    CHECK_FALSE(strong_calmness_probe(ref, fast_probe()).diverging);
    CHECK_FALSE(pseudo_isolated_probe(ref, fast_probe()).diverging);
  }
  {
    auto [prog, pt] = load_point("p3", "unique");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    CHECK_FALSE(strong_calmness_probe(ref, fast_probe()).diverging);
  }
  {
    auto [prog, pt] = load_point("p4", "degenerate");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    CHECK_FALSE(pseudo_isolated_probe(ref, fast_probe()).diverging);
  }
}

TEST_CASE("equivalence experiment truth tables hold on the corpus") {
  for (auto [prob, point] : {std::pair<const char*, const char*>{"p1", "critical"},
                             {"p1", "noncritical"},
                             {"p2", "lam1"},
                             {"p3", "unique"},
                             {"p4", "degenerate"}}) {
    CAPTURE(prob);
    CAPTURE(point);
    auto [prog, pt] = load_point(prob, point);
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    EquivalenceReport rep = equivalence_experiment(ref, fast_probe());
    CHECK(rep.error_bound_equiv_ok);
    CHECK(rep.decomposition_equiv_ok);
  }
}

TEST_CASE("bounded pseudo-isolated ratios imply a noncritical multiplier") {
  // necessity direction of the pseudo-isolated calmness characterization,
  // checked as a cross-module assertion on every corpus point
  for (auto [prob, point] : {std::pair<const char*, const char*>{"p1", "critical"},
                             {"p1", "noncritical"},
                             {"p2", "lam0"},
                             {"p2", "lam1"},
                             {"p2", "lam10"},
                             {"p3", "unique"},
                             {"p4", "degenerate"}}) {
    CAPTURE(prob);
    CAPTURE(point);
    auto [prog, pt] = load_point(prob, point);
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    RatioStats st = pseudo_isolated_probe(ref, fast_probe(17));
    if (!st.diverging) {
      EngineConfig cfg;
      cfg.seed = 17;
      CHECK(noncriticality_test(prog, pt, cfg).status == VerdictStatus::Holds);
    }
  }
}

TEST_CASE("probe determinism: identical seeds give identical stats") {
  auto [prog, pt] = load_point("p1", "critical");
  MultiplierSetRef ref = make_multiplier_ref(prog, pt);
  RatioStats a = error_bound_probe(ref, fast_probe(11));
  ProbeConfig serial = fast_probe(11);
  serial.exec = Exec::Serial;
  RatioStats b = error_bound_probe(ref, serial);
  REQUIRE(a.per_radius.size() == b.per_radius.size());
  for (size_t i = 0; i < a.per_radius.size(); ++i) {
    CHECK(a.per_radius[i].max_ratio == b.per_radius[i].max_ratio);
    CHECK(a.per_radius[i].p99 == b.per_radius[i].p99);
    CHECK(a.per_radius[i].p90 == b.per_radius[i].p90);
  }
}

TEST_CASE("direct perturbation sampling agrees with the reverse construction") {
  auto [prog, pt] = load_point("p2", "lam1");
  MultiplierSetRef ref = make_multiplier_ref(prog, pt);
  ProbeConfig cfg = fast_probe(3);
  cfg.samples = 150;
  RatioStats direct = strong_calmness_probe(ref, cfg, /*direct_sampling=*/true);
  RatioStats reverse = strong_calmness_probe(ref, cfg, /*direct_sampling=*/false);
  CHECK(direct.diverging == reverse.diverging);
}
