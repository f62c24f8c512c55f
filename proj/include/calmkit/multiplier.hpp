// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <optional>

#include "calmkit/probe_stats.hpp"
#include "calmkit/stability.hpp"

namespace calmkit {

/// Geometry of the multiplier set M = H(eta) ∩ N_K(ybar) at a KKT point,
/// where H(eta) = {lambda : eta + adj(g'(xbar)) lambda = 0}.
struct MultiplierSetRef {
  ConicProgram prog;
  KKTPoint point;
  Vector eta;        // grad f(xbar)
  Matrix jac;        // g'(xbar), m x n
  Matrix affine_op;  // adjoint jac^T, n x m: H = {lambda : affine_op lambda = -eta}
};

MultiplierSetRef make_multiplier_ref(const ConicProgram& prog, const KKTPoint& pt);

struct DistToSetResult {
  double dist = 0;
  Vector nearest;  // certified member of H ∩ N_K(ybar)
  int iterations = 0;
};

struct DykstraConfig {
  int max_iter = 10000;
  double gap_tol = 1e-11;
  double member_tol = 1e-9;
};

/// Distance to the multiplier set by Dykstra alternation between the affine
/// set H (closed-form least squares) and N_K(ybar) (facial projection).
/// Throws with the last gap if the iteration budget runs out.
DistToSetResult dist_to_multiplier_set(const MultiplierSetRef& ref, const Vector& lambda,
                                       const DykstraConfig& cfg = {});

/// Search for a multiplier in ri(N_K(ybar)) ∩ H(eta) with facial margin at
/// least ri_margin. Absence is a value (the search is incomplete), not an
/// error.
std::optional<Vector> find_ri_multiplier(const MultiplierSetRef& ref,
                                         double ri_margin = 1e-6, int max_rounds = 50);

/// Facial interiority margin of lambda inside N_K(ybar): the smallest slack
/// over the degenerate face directions (+inf when N is a subspace or {0}).
double ri_facial_margin(const MultiplierSetRef& ref, const Vector& lambda);

/// Isolated calmness of the multiplier map M at (xbar, 0, 0): dlambda = 0
/// must be the only solution of adj(g') dlambda = 0, Pi'(ybar+lambdabar; dlambda) = 0.
StabilityVerdict m_isolated_calmness_test(const ConicProgram& prog, const KKTPoint& pt,
                                          const EngineConfig& cfg = {});

/// Calmness probe for M through the map G_xbar: reverse-engineered samples
/// lambda in G_xbar(eta', y') near lambdabar, ratios dist(lambda, M) over
/// the parameter displacement. Falsification instrument only.
RatioStats calmness_probe_M(const MultiplierSetRef& ref, const ProbeConfig& cfg);

/// Metric-subregularity probe for F(x) = g(x) - K at xbar: ratios
/// dist(x, g^{-1}(K)) / dist(g(x), K) with the numerator estimated by
/// Gauss-Newton feasibility restoration.
RatioStats subregularity_probe(const ConicProgram& prog, const Vector& xbar,
                               const ProbeConfig& cfg);

}  // namespace calmkit
