// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace calmkit::linalg {

namespace {

double offdiag_norm(const Matrix& a) {
  double s = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

EigResult jacobi_eigh(const Matrix& a_in) {
  const Index n = a_in.rows();
  if (a_in.cols() != n) throw Error("jacobi_eigh", "matrix not square");
  Matrix a = 0.5 * (a_in + a_in.transpose());
  Matrix v = Matrix::Identity(n, n);

  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  const int max_sweeps = 100;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (offdiag_norm(a) <= tol) break;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        // smaller-angle root keeps the rotation stable
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (offdiag_norm(a) > 1e-8 * scale) {
    throw Error("jacobi_eigh", "did not converge in 100 sweeps");
  }

  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index i, Index j) {
    if (a(i, i) != a(j, j)) return a(i, i) > a(j, j);
    return i < j;
  });

  EigResult res;
  res.values.resize(n);
  res.vectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    res.values[i] = a(order[static_cast<size_t>(i)], order[static_cast<size_t>(i)]);
    res.vectors.col(i) = v.col(order[static_cast<size_t>(i)]);
  }
  return res;
}

Matrix kernel_basis(const Matrix& a, double rel_tol) {
  if (a.rows() == 0) {
    return Matrix::Identity(a.cols(), a.cols());
  }
  Eigen::FullPivLU<Matrix> lu(a);
  double scale = a.cwiseAbs().maxCoeff();
  lu.setThreshold(rel_tol * std::max(1.0, scale));
  Matrix k = lu.kernel();
  if (lu.dimensionOfKernel() == 0) return Matrix(a.cols(), 0);
  // orthonormalize for stable downstream use
  Eigen::HouseholderQR<Matrix> qr(k);
  Matrix q = qr.householderQ() * Matrix::Identity(k.rows(), k.cols());
  return q;
}

Vector least_squares(const Matrix& a, const Vector& b) {
  if (a.rows() == 0) return Vector::Zero(a.cols());
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  return cod.solve(b);
}

Vector project_affine(const Matrix& a, const Vector& b, const Vector& p) {
  if (a.rows() == 0) return p;
  // p - A^+ (A p - b) is the closest point of {x : A x = b}
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  return p - cod.solve(a * p - b);
}

bool lp_feasible(const Matrix& ineq_a, const Vector& ineq_b, Vector* out) {
  // Feasibility of A x >= b with x free. Shift to standard form with
  // x = xp - xm, slack s: A xp - A xm - s = b, all vars >= 0, then phase-1
  // with artificial variables and Bland's rule.
  const Index m = ineq_a.rows();
  const Index n = ineq_a.cols();
  if (m == 0) {
    if (out) *out = Vector::Zero(n);
    return true;
  }

  const Index nv = 2 * n + m;  // xp, xm, slack
  Matrix a(m, nv);
  a.block(0, 0, m, n) = ineq_a;
  a.block(0, n, m, n) = -ineq_a;
  a.block(0, 2 * n, m, m) = -Matrix::Identity(m, m);
  Vector b = ineq_b;
  for (Index i = 0; i < m; ++i) {
    if (b[i] < 0) {
      a.row(i) = -a.row(i);
      b[i] = -b[i];
    }
  }

  // tableau with artificial basis
  const Index total = nv + m;
  Matrix t(m + 1, total + 1);
  t.setZero();
  t.block(0, 0, m, nv) = a;
  t.block(0, nv, m, m) = Matrix::Identity(m, m);
  t.block(0, total, m, 1) = b;
  // objective: minimize sum of artificials -> row = -sum of constraint rows
  for (Index j = 0; j <= total; ++j) {
    double s = 0.0;
    for (Index i = 0; i < m; ++i) s += t(i, j);
    t(m, j) = -s;
  }
  for (Index i = 0; i < m; ++i) t(m, nv + i) = 0.0;

  std::vector<Index> basis(static_cast<size_t>(m));
  for (Index i = 0; i < m; ++i) basis[static_cast<size_t>(i)] = nv + i;

  const double eps = 1e-11;
  const int max_iters = 2000;
  for (int iter = 0; iter < max_iters; ++iter) {
    // Bland: entering variable = smallest index with negative reduced cost
    Index enter = -1;
    for (Index j = 0; j < total; ++j) {
      if (t(m, j) < -eps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;

    Index leave = -1;
    double best_ratio = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (t(i, enter) > eps) {
        double ratio = t(i, total) / t(i, enter);
        if (leave < 0 || ratio < best_ratio - eps ||
            (ratio < best_ratio + eps &&
             basis[static_cast<size_t>(i)] < basis[static_cast<size_t>(leave)])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) break;  // unbounded phase-1 cannot happen; defensive exit

    double piv = t(leave, enter);
    t.row(leave) /= piv;
    for (Index i = 0; i <= m; ++i) {
      if (i == leave) continue;
      double f = t(i, enter);
      if (f != 0.0) t.row(i) -= f * t.row(leave);
    }
    basis[static_cast<size_t>(leave)] = enter;
  }

  double artificial_sum = 0.0;
  for (Index i = 0; i < m; ++i) {
    if (basis[static_cast<size_t>(i)] >= nv) artificial_sum += t(i, total);
  }
  if (artificial_sum > 1e-8) return false;

  if (out) {
    Vector full = Vector::Zero(total);
    for (Index i = 0; i < m; ++i) {
      if (basis[static_cast<size_t>(i)] < total) {
        full[basis[static_cast<size_t>(i)]] = t(i, total);
      }
    }
    Vector x(n);
    for (Index j = 0; j < n; ++j) x[j] = full[j] - full[n + j];
    *out = x;
  }
  return true;
}

}  // namespace calmkit::linalg
