#include <cmath>

#include "calmkit/linalg.hpp"
#include "calmkit/rng.hpp"
#include "doctest.h"

using namespace calmkit;

TEST_CASE("jacobi eigendecomposition reconstructs random symmetric matrices") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    Index n = 1 + static_cast<Index>(rng.next_u64() % 8);
    Matrix a(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.gaussian();
    linalg::EigResult e = linalg::jacobi_eigh(a);
    Matrix rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK((rec - a).norm() <= 1e-10 * (1.0 + a.norm()));
    CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).norm() <= 1e-10);
    for (Index i = 0; i + 1 < n; ++i) CHECK(e.values[i] >= e.values[i + 1]);
  }
}

TEST_CASE("kernel basis spans the null space") {
  Matrix a(2, 4);
  a << 1, 0, 1, 0,
       0, 1, 0, 1;
  Matrix k = linalg::kernel_basis(a);
  CHECK(k.cols() == 2);
  CHECK((a * k).norm() <= 1e-12);
  CHECK((k.transpose() * k - Matrix::Identity(2, 2)).norm() <= 1e-12);
}

TEST_CASE("least squares returns the minimum-norm solution") {
  Matrix a(1, 2);
  a << 1, 1;
  Vector b(1);
  b << 2;
  Vector x = linalg::least_squares(a, b);
  CHECK(std::abs(x[0] - 1.0) <= 1e-12);
  CHECK(std::abs(x[1] - 1.0) <= 1e-12);
}

TEST_CASE("affine projection") {
  Matrix a(1, 2);
  a << 1, 0;
  Vector b(1);
  b << 3;
  Vector p(2);
  p << 0, 5;
  Vector q = linalg::project_affine(a, b, p);
  CHECK(std::abs(q[0] - 3.0) <= 1e-12);
  CHECK(std::abs(q[1] - 5.0) <= 1e-12);
}

TEST_CASE("lp feasibility: basic cones") {
  // {x : x1 >= 1, -x1 >= -2} feasible
  Matrix a(2, 1);
  a << 1, -1;
  Vector b(2);
  b << 1, -2;
  Vector x;
  CHECK(linalg::lp_feasible(a, b, &x));
  CHECK(x[0] >= 1.0 - 1e-9);
  CHECK(x[0] <= 2.0 + 1e-9);

  // {x : x1 >= 1, -x1 >= 0} infeasible
  Matrix a2(2, 1);
  a2 << 1, -1;
  Vector b2(2);
  b2 << 1, 0;
  CHECK_FALSE(linalg::lp_feasible(a2, b2, nullptr));
}

TEST_CASE("lp feasibility: random polytopes vs sampling oracle") {
  Rng rng(7);
  int verified = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Index n = 1 + static_cast<Index>(rng.next_u64() % 3);
    Index m = 1 + static_cast<Index>(rng.next_u64() % 5);
    Matrix a(m, n);
    Vector b(m);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) a(i, j) = rng.gaussian();
      b[i] = rng.gaussian();
    }
    Vector x;
    bool feas = linalg::lp_feasible(a, b, &x);
    if (feas) {
      CHECK((a * x - b).minCoeff() >= -1e-7);
      ++verified;
    } else {
      // brute-force search for a counterexample
      bool found = false;
      Rng inner(rng.next_u64());
      for (int k = 0; k < 20000 && !found; ++k) {
        Vector cand = 10.0 * inner.gaussian_vector(n);
        if ((a * cand - b).minCoeff() >= 0.0) found = true;
      }
      CHECK_FALSE(found);
    }
  }
  CHECK(verified > 50);
}
