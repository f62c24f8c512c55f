// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/problem.hpp"

#include <cmath>
#include <limits>

#include "calmkit/rng.hpp"

namespace calmkit {

QuadraticEvaluator::QuadraticEvaluator(Matrix q, Vector c, double r,
                                       std::vector<Row> rows)
    : q_(std::move(q)), c_(std::move(c)), r_(r), rows_(std::move(rows)) {
  const Index n = c_.size();
  if (q_.rows() != n || q_.cols() != n)
    throw Error("QuadraticEvaluator", "objective Q must be n x n");
  if ((q_ - q_.transpose()).lpNorm<Eigen::Infinity>() >
      1e-12 * (1.0 + q_.lpNorm<Eigen::Infinity>()))
    throw Error("QuadraticEvaluator", "objective Q not symmetric");
  q_ = 0.5 * (q_ + q_.transpose());
  for (size_t i = 0; i < rows_.size(); ++i) {
    Row& row = rows_[i];
    if (row.a.size() == 0) row.a = Matrix::Zero(n, n);
    if (row.b.size() == 0) row.b = Vector::Zero(n);
    if (row.a.rows() != n || row.a.cols() != n || row.b.size() != n)
      throw Error("QuadraticEvaluator",
                  "constraint row " + std::to_string(i) + " has wrong dimensions");
    if ((row.a - row.a.transpose()).lpNorm<Eigen::Infinity>() >
        1e-12 * (1.0 + row.a.lpNorm<Eigen::Infinity>()))
      throw Error("QuadraticEvaluator",
                  "constraint row " + std::to_string(i) + " matrix not symmetric");
    row.a = 0.5 * (row.a + row.a.transpose());
  }
}

double QuadraticEvaluator::f(const Vector& x) const {
  return 0.5 * x.dot(q_ * x) + c_.dot(x) + r_;
}

Vector QuadraticEvaluator::grad_f(const Vector& x) const { return q_ * x + c_; }

Matrix QuadraticEvaluator::hess_f(const Vector&) const { return q_; }

Vector QuadraticEvaluator::g(const Vector& x) const {
  Vector out(output_dim());
  for (size_t i = 0; i < rows_.size(); ++i) {
    const Row& row = rows_[i];
    out[static_cast<Index>(i)] = 0.5 * x.dot(row.a * x) + row.b.dot(x) + row.d;
  }
  return out;
}

Matrix QuadraticEvaluator::jac_g(const Vector& x) const {
  Matrix out(output_dim(), input_dim());
  for (size_t i = 0; i < rows_.size(); ++i) {
    const Row& row = rows_[i];
    out.row(static_cast<Index>(i)) = (row.a * x + row.b).transpose();
  }
  return out;
}

Matrix QuadraticEvaluator::hess_g_contract(const Vector&, const Vector& lambda) const {
  Matrix out = Matrix::Zero(input_dim(), input_dim());
  for (size_t i = 0; i < rows_.size(); ++i) {
    double li = lambda[static_cast<Index>(i)];
    if (li != 0.0) out += li * rows_[i].a;
  }
  return out;
}

Matrix lagrangian_hessian(const ConicProgram& prog, const Vector& x,
                          const Vector& lambda) {
  if (x.size() != prog.n || lambda.size() != prog.m())
    throw Error("lagrangian_hessian", "dimension mismatch");
  return prog.eval->hess_f(x) + prog.eval->hess_g_contract(x, lambda);
}

Vector stationarity_residual(const ConicProgram& prog, const Vector& x,
                             const Vector& lambda, const Vector& a) {
  return prog.eval->grad_f(x) + prog.eval->jac_g(x).transpose() * lambda - a;
}

std::pair<Vector, Vector> kkt_residual(const ConicProgram& prog, const Vector& x,
                                       const Vector& lambda, const Vector& a,
                                       const Vector& b) {
  if (x.size() != prog.n || lambda.size() != prog.m() || a.size() != prog.n ||
      b.size() != prog.m())
    throw Error("kkt_residual", "dimension mismatch");
  Vector r1 = stationarity_residual(prog, x, lambda, a);
  Vector shifted = prog.eval->g(x) - b;
  Vector r2 = shifted - prog.cone.project(shifted + lambda);
  return {std::move(r1), std::move(r2)};
}

double kkt_residual_norm(const ConicProgram& prog, const Vector& x,
                         const Vector& lambda, const Vector& a, const Vector& b) {
  auto [r1, r2] = kkt_residual(prog, x, lambda, a, b);
  return std::sqrt(r1.squaredNorm() + r2.squaredNorm());
}

KKTPoint validate_kkt_point(const ConicProgram& prog, const Vector& x,
                            const Vector& lambda, double tol) {
  auto [r1, r2] = kkt_residual(prog, x, lambda, Vector::Zero(prog.n),
                               Vector::Zero(prog.m()));
  double scale = 1.0 + x.norm() + lambda.norm();
  if (r1.norm() > tol * scale) {
    throw Error("validate_kkt_point",
                "stationarity violated: |r1| = " + std::to_string(r1.norm()));
  }
  if (r2.norm() > tol * scale) {
    throw Error("validate_kkt_point",
                "complementarity/feasibility violated: |r2| = " +
                    std::to_string(r2.norm()));
  }
  KKTPoint pt;
  pt.x = x;
  pt.lambda = lambda;
  pt.y = prog.eval->g(x);
  pt.residual = std::sqrt(r1.squaredNorm() + r2.squaredNorm());
  // classify against the exactly complementary pair so tiny input noise in
  // (y, lambda) cannot break the facial split
  Vector z = pt.y + lambda;
  Vector ybar = prog.cone.project(z);
  pt.face = face_descriptor(prog.cone, ybar, z - ybar);
  pt.warnings = pt.face.ambiguities;
  return pt;
}

SelfcheckReport derivative_selfcheck(const ConicProgram& prog, const Vector& x,
                                     std::uint64_t seed, double threshold) {
  const ProgramEvaluator& ev = *prog.eval;
  const Index n = prog.n;
  const Index m = prog.m();
  Rng rng(seed ^ 0x5e1fc0deULL);

  SelfcheckReport rep;
  auto record = [&](double err, const std::string& what) {
    if (err > rep.max_rel_err) {
      rep.max_rel_err = err;
      rep.worst = what;
    }
  };

  auto step_for = [](double xi) {
    const double cbrt_eps = std::cbrt(std::numeric_limits<double>::epsilon());
    return cbrt_eps * (1.0 + std::abs(xi));
  };

  // gradient of f vs central differences of f
  {
    Vector gf = ev.grad_f(x);
    double scale = 1.0 + gf.norm();
    for (Index i = 0; i < n; ++i) {
      Vector xp = x, xm = x;
      double h = step_for(x[i]);
      xp[i] += h;
      xm[i] -= h;
      double fd = (ev.f(xp) - ev.f(xm)) / (2 * h);
      record(std::abs(fd - gf[i]) / scale, "grad_f[" + std::to_string(i) + "]");
    }
  }

  // Jacobian of g vs central differences of g
  {
    Matrix jg = ev.jac_g(x);
    double scale = 1.0 + jg.norm();
    for (Index i = 0; i < n; ++i) {
      Vector xp = x, xm = x;
      double h = step_for(x[i]);
      xp[i] += h;
      xm[i] -= h;
      Vector fd = (ev.g(xp) - ev.g(xm)) / (2 * h);
      record((fd - jg.col(i)).lpNorm<Eigen::Infinity>() / scale,
             "jac_g column " + std::to_string(i));
    }
  }

  // Lagrangian Hessian vs central differences of grad_x L at a random lambda
  {
    Vector lam = rng.gaussian_vector(m);
    Matrix hl = lagrangian_hessian(prog, x, lam);
    double scale = 1.0 + hl.norm();
    auto grad_l = [&](const Vector& xx) -> Vector {
      return ev.grad_f(xx) + ev.jac_g(xx).transpose() * lam;
    };
    for (Index i = 0; i < n; ++i) {
      Vector xp = x, xm = x;
      double h = step_for(x[i]);
      xp[i] += h;
      xm[i] -= h;
      Vector fd = (grad_l(xp) - grad_l(xm)) / (2 * h);
      record((fd - hl.col(i)).lpNorm<Eigen::Infinity>() / scale,
             "lagrangian_hessian column " + std::to_string(i));
    }
  }

  rep.pass = rep.max_rel_err <= threshold;
  return rep;
}

}  // namespace calmkit
