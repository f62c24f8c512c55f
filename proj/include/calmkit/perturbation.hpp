// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include "calmkit/multiplier.hpp"
#include "calmkit/probe_stats.hpp"

namespace calmkit {

// ---------------------------------------------------------------------------
// Reverse-engineered perturbations: given any (x, lambda), the pair
// (x, lambda + b) solves the KKT system perturbed by (a + adj(g'(x)) b, b)
// with a = grad_x L(x, lambda), b = g(x) - Pi_K(g(x) + lambda). An exact
// identity; the lab's generator of solvable perturbations.
// ---------------------------------------------------------------------------

struct ReversePerturbation {
  Vector a;        // full right-hand perturbation a + adj(g') b
  Vector b;
  Vector x;        // the constructed solution
  Vector lambda;   // lambda + b
  double residual; // KKT residual of the constructed solution (should be ~0)
};

ReversePerturbation reverse_perturbation(const ConicProgram& prog, const Vector& x,
                                         const Vector& lambda);

// ---------------------------------------------------------------------------
// Semismooth Newton on the natural residual
// ---------------------------------------------------------------------------

struct NewtonConfig {
  int max_iter = 200;
  double tol = 1e-10;  // scaled by 1 + |a| + |b|
  double stagnation_decrease = 1e-14;
  int stagnation_window = 10;
};

struct NewtonResult {
  bool converged = false;
  Vector x;
  Vector lambda;
  int iterations = 0;
  double residual = 0;
  std::string trace;  // failure diagnostics
};

/// Solve the KKT system at perturbation (a, b), starting from (x0, lambda0).
/// Semismooth Newton with a per-block generalized derivative of Pi_K,
/// Levenberg-Marquardt damping on singular steps and a residual-decrease
/// line search.
NewtonResult solve_perturbed_kkt(const ConicProgram& prog, const Vector& a,
                                 const Vector& b, const Vector& x0,
                                 const Vector& lambda0, const NewtonConfig& cfg = {});

/// One generalized-derivative element of Pi_K at z (m x m matrix).
/// Orthant ties take the inactive side (derivative one).
Matrix projection_generalized_jacobian(const ProductCone& cone, const Vector& z);

// ---------------------------------------------------------------------------
// Ratio probes around a reference KKT point
// ---------------------------------------------------------------------------

/// Error-bound ratio (|x - xbar| + dist(lambda, M)) / |KKT residual| over
/// points sampled in shrinking balls.
RatioStats error_bound_probe(const MultiplierSetRef& ref, const ProbeConfig& cfg);

/// Strong-calmness ratio (|x - xbar| + dist(lambda, M)) / |(a, b)| over
/// solutions of perturbed systems generated by reverse_perturbation.
/// With direct_sampling, perturbations (a, b) are drawn directly and solved
/// by semismooth Newton instead (slower; kept for comparison).
RatioStats strong_calmness_probe(const MultiplierSetRef& ref, const ProbeConfig& cfg,
                                 bool direct_sampling = false);

/// Pseudo-isolated-calmness ratio |x - xbar| / |(a, b)|, multiplier localized.
RatioStats pseudo_isolated_probe(const MultiplierSetRef& ref, const ProbeConfig& cfg);

// ---------------------------------------------------------------------------
// Equivalence experiments
// ---------------------------------------------------------------------------

struct EquivalenceReport {
  RatioStats error_bound;
  RatioStats strong_calmness;
  RatioStats pseudo_isolated;
  RatioStats m_calmness;
  // error bound <=> strong calmness
  bool error_bound_equiv_ok = false;
  // strong calmness <=> pseudo-isolated calmness and M-calmness
  bool decomposition_equiv_ok = false;
  std::string detail;
};

/// Runs all four probes and checks the two equivalences on the
/// bounded/diverging classifications. A violated truth table is flagged,
/// never auto-resolved.
EquivalenceReport equivalence_experiment(const MultiplierSetRef& ref,
                                         const ProbeConfig& cfg);

}  // namespace calmkit
