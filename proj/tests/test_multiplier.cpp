#include <cmath>

#include "calmkit/linalg.hpp"
#include "calmkit/multiplier.hpp"
#include "calmkit/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace calmkit;
using calmkit::testing::load_point;

namespace {

ProbeConfig fast_probe(std::uint64_t seed = 1) {
  ProbeConfig cfg;
  cfg.samples = 400;
  cfg.seed = seed;
  return cfg;
}

Vector svec_diag(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return svec(m);
}

}  // namespace

TEST_CASE("distance to the multiplier set") {
  SUBCASE("p1: the set is the whole line") {
    auto [prog, pt] = load_point("p1", "critical");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    DistToSetResult d = dist_to_multiplier_set(ref, Vector::Constant(1, 7.0));
    CHECK(d.dist <= 1e-10);
  }
  SUBCASE("p2: projection onto the nonnegative ray") {
    auto [prog, pt] = load_point("p2", "lam1");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    DistToSetResult d = dist_to_multiplier_set(ref, Vector::Constant(1, -3.0));
    CHECK(d.dist == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(d.nearest[0] == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("p4: intersection of the nsd cone with equal diagonals") {
    auto [prog, pt] = load_point("p4", "degenerate");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    DistToSetResult d = dist_to_multiplier_set(ref, svec_diag(-1, -3));
    CHECK(d.dist == doctest::Approx(std::sqrt(2.0)).epsilon(1e-8));
    CHECK((d.nearest - svec_diag(-2, -2)).norm() <= 1e-8);
  }
  SUBCASE("Dykstra limit is optimal against random feasible points") {
    auto [prog, pt] = load_point("p4", "degenerate");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    Rng rng(99);
    Vector lam = rng.gaussian_vector(3);
    DistToSetResult d = dist_to_multiplier_set(ref, lam);
    for (int t = 0; t < 100; ++t) {
      Vector mu = dist_to_multiplier_set(ref, 3.0 * rng.gaussian_vector(3)).nearest;
      CHECK((lam - d.nearest).norm() <= (lam - mu).norm() + 1e-7);
    }
  }
}

TEST_CASE("relative-interior multiplier search") {
  SUBCASE("p1: normal cone is a subspace, anything certifies") {
    auto [prog, pt] = load_point("p1", "critical");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    auto ri = find_ri_multiplier(ref);
    REQUIRE(ri.has_value());
    CHECK(ri_facial_margin(ref, *ri) > 1e6);  // +inf margin
  }
  SUBCASE("p2: strictly positive multiplier") {
    auto [prog, pt] = load_point("p2", "lam0");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    auto ri = find_ri_multiplier(ref);
    REQUIRE(ri.has_value());
    CHECK((*ri)[0] >= 1e-6);
    CHECK(dist_to_multiplier_set(ref, *ri).dist <= 1e-8);
  }
  SUBCASE("p4: negative definite with equal diagonal") {
    auto [prog, pt] = load_point("p4", "degenerate");
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    auto ri = find_ri_multiplier(ref);
    REQUIRE(ri.has_value());
    Matrix lam = smat(*ri);
    CHECK(lam(0, 0) == doctest::Approx(lam(1, 1)).epsilon(1e-9));
    linalg::EigResult e = linalg::jacobi_eigh(lam);
    CHECK(e.values.maxCoeff() <= -1e-6);
    CHECK(ri_facial_margin(ref, *ri) >= 1e-6);
    CHECK(dist_to_multiplier_set(ref, *ri).dist <= 1e-8);
    CHECK(prog.cone.normal_cone_contains(pt.y, *ri));
  }
}

TEST_CASE("isolated calmness of the multiplier map") {
  SUBCASE("p3: identity constraint forces the trivial solution") {
    auto [prog, pt] = load_point("p3", "unique");
    StabilityVerdict v = m_isolated_calmness_test(prog, pt);
    CHECK(v.status == VerdictStatus::Holds);
  }
  SUBCASE("p1: fully degenerate, witness exists") {
    auto [prog, pt] = load_point("p1", "critical");
    StabilityVerdict v = m_isolated_calmness_test(prog, pt);
    REQUIRE(v.status == VerdictStatus::Fails);
    CHECK(v.residual <= 1e-8);
    CHECK(v.witness.norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("p2: same degeneracy") {
    auto [prog, pt] = load_point("p2", "lam1");
    StabilityVerdict v = m_isolated_calmness_test(prog, pt);
    REQUIRE(v.status == VerdictStatus::Fails);
    HomogeneousSystem sys = make_system(prog, pt, SystemMode::MIsolated);
    CHECK(verify_witness(sys, v.witness) <= 1e-8);
  }
}

TEST_CASE("calmness probe for M stays bounded on the corpus") {
  for (auto [prob, point] : {std::pair<const char*, const char*>{"p1", "critical"},
                             {"p2", "lam1"},
                             {"p4", "degenerate"}}) {
    auto [prog, pt] = load_point(prob, point);
    MultiplierSetRef ref = make_multiplier_ref(prog, pt);
    RatioStats st = calmness_probe_M(ref, fast_probe());
    CHECK_FALSE(st.diverging);
  }
}

TEST_CASE("subregularity probe") {
  SUBCASE("identity constraint map: ratios are exactly one") {
    auto [prog, pt] = load_point("p3", "unique");
    RatioStats st = subregularity_probe(prog, pt.x, fast_probe());
    CHECK_FALSE(st.diverging);
    for (const RadiusStats& rs : st.per_radius) {
      CHECK(rs.samples > 0);
      CHECK(rs.max_ratio == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("squared equality constraint: probe diverges") {
    auto [prog, pt] = load_point("p1", "critical");
    RatioStats st = subregularity_probe(prog, pt.x, fast_probe());
    CHECK(st.diverging);
    CHECK(st.growth_p90_per_decade >= 5.0);
  }
  SUBCASE("squared inequality constraint: same failure") {
    auto [prog, pt] = load_point("p2", "lam0");
    RatioStats st = subregularity_probe(prog, pt.x, fast_probe());
    CHECK(st.diverging);
  }
}

TEST_CASE("probe determinism: same seed, same stats") {
  auto [prog, pt] = load_point("p4", "degenerate");
  MultiplierSetRef ref = make_multiplier_ref(prog, pt);
  RatioStats a = calmness_probe_M(ref, fast_probe(7));
  ProbeConfig serial_cfg = fast_probe(7);
  serial_cfg.exec = Exec::Serial;
  RatioStats b = calmness_probe_M(ref, serial_cfg);
  REQUIRE(a.per_radius.size() == b.per_radius.size());
  for (size_t i = 0; i < a.per_radius.size(); ++i) {
    CHECK(a.per_radius[i].max_ratio == b.per_radius[i].max_ratio);
    CHECK(a.per_radius[i].p99 == b.per_radius[i].p99);
    CHECK(a.per_radius[i].samples == b.per_radius[i].samples);
  }
}
