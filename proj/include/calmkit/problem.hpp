// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "calmkit/cone.hpp"
#include "calmkit/types.hpp"

namespace calmkit {

/// Twice-differentiable problem data. The built-in implementation is
/// quadratic (exact derivatives, file-parseable); anything else goes through
/// the same interface but must pass derivative_selfcheck before verdicts
/// are trusted.
class ProgramEvaluator {
 public:
  virtual ~ProgramEvaluator() = default;
  virtual Index input_dim() const = 0;
  virtual Index output_dim() const = 0;
  virtual double f(const Vector& x) const = 0;
  virtual Vector grad_f(const Vector& x) const = 0;
  virtual Matrix hess_f(const Vector& x) const = 0;
  virtual Vector g(const Vector& x) const = 0;
  /// m x n Jacobian g'(x); its transpose is the adjoint used in KKT systems.
  virtual Matrix jac_g(const Vector& x) const = 0;
  /// sum_i lambda_i hess g_i(x)
  virtual Matrix hess_g_contract(const Vector& x, const Vector& lambda) const = 0;
};

/// f(x) = 1/2 x'Qx + c'x + r, g_i(x) = 1/2 x'A_i x + b_i'x + d_i
class QuadraticEvaluator final : public ProgramEvaluator {
 public:
  struct Row {
    Matrix a;
    Vector b;
    double d = 0;
  };

  QuadraticEvaluator(Matrix q, Vector c, double r, std::vector<Row> rows);

  Index input_dim() const override { return c_.size(); }
  Index output_dim() const override { return static_cast<Index>(rows_.size()); }
  double f(const Vector& x) const override;
  Vector grad_f(const Vector& x) const override;
  Matrix hess_f(const Vector& x) const override;
  Vector g(const Vector& x) const override;
  Matrix jac_g(const Vector& x) const override;
  Matrix hess_g_contract(const Vector& x, const Vector& lambda) const override;

  const Matrix& q() const { return q_; }
  const Vector& c() const { return c_; }
  double r() const { return r_; }
  const std::vector<Row>& rows() const { return rows_; }

 private:
  Matrix q_;
  Vector c_;
  double r_;
  std::vector<Row> rows_;
};

struct ConicProgram {
  Index n = 0;
  ProductCone cone;
  std::shared_ptr<const ProgramEvaluator> eval;

  Index m() const { return cone.total_dim(); }
};

/// hess f(x) + sum_i lambda_i hess g_i(x)
Matrix lagrangian_hessian(const ConicProgram& prog, const Vector& x,
                          const Vector& lambda);

/// grad_x L(x, lambda) - a
Vector stationarity_residual(const ConicProgram& prog, const Vector& x,
                             const Vector& lambda, const Vector& a);

/// Natural residual of the perturbed KKT system:
/// r1 = grad f(x) + jac'(x) lambda - a,  r2 = g(x) - b - Pi_K(g(x) - b + lambda)
std::pair<Vector, Vector> kkt_residual(const ConicProgram& prog, const Vector& x,
                                       const Vector& lambda, const Vector& a,
                                       const Vector& b);

double kkt_residual_norm(const ConicProgram& prog, const Vector& x,
                         const Vector& lambda, const Vector& a, const Vector& b);

struct KKTPoint {
  Vector x;
  Vector lambda;
  Vector y;  // g(x)
  FaceDescriptor face;
  double residual = 0;
  std::vector<std::string> warnings;
};

/// Accepts (x, lambda) as a KKT point of the unperturbed problem, or throws
/// naming the violated condition. Face ambiguities become warnings.
KKTPoint validate_kkt_point(const ConicProgram& prog, const Vector& x,
                            const Vector& lambda, double tol = 1e-8);

struct SelfcheckReport {
  double max_rel_err = 0;
  bool pass = false;
  std::string worst;
};

/// Analytic derivatives against central finite differences at x, with random
/// probe directions drawn from the seed. Quadratic programs sit at the
/// rounding floor; the acceptance threshold is 1e-7.
SelfcheckReport derivative_selfcheck(const ConicProgram& prog, const Vector& x,
                                     std::uint64_t seed = 0,
                                     double threshold = 1e-7);

}  // namespace calmkit
