// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "calmkit/parallel.hpp"
#include "calmkit/problem.hpp"

namespace calmkit {

// ---------------------------------------------------------------------------
// Homogeneous first-order systems at a KKT point. All four share the shape
//   linear part = 0,   Y(u) - Pi'_K(ybar + lambdabar; H(u)) = 0
// and are positively homogeneous of degree one in the unknown u.
// ---------------------------------------------------------------------------

enum class SystemMode {
  Noncritical,   // unknowns (xi, v); nontrivial means xi != 0
  XIsolated,     // unknown xi
  MIsolated,     // unknown dlambda
  SkktIsolated,  // unknowns (u, v); nontrivial means (u, v) != 0
};

enum class VerdictStatus { Holds, Fails, Inconclusive };
enum class DecisionMethod { Auto, FaceEnum, Multistart };

const char* to_string(VerdictStatus s);
const char* to_string(SystemMode m);

struct HomogeneousSystem {
  Matrix hess;         // Lagrangian Hessian at (xbar, lambdabar)
  Matrix jac;          // g'(xbar), m x n
  FaceDescriptor face; // face of (ybar, lambdabar): kink structure of Pi'
  SystemMode mode;
  Index n = 0;
  Index m = 0;

  Index unknown_dim() const;
  /// Stacked residual (r1; r2) at the unknown u (layout per mode).
  Vector residual(const Vector& u) const;
  /// Norm of the component that certificates normalize to one.
  double constrained_norm(const Vector& u) const;
};

HomogeneousSystem make_system(const ConicProgram& prog, const KKTPoint& point,
                              SystemMode mode);

struct EngineConfig {
  DecisionMethod method = DecisionMethod::Auto;
  int starts = 64;
  std::uint64_t seed = 0;
  double tol_fail = 1e-8;  // certificate residual after normalization
  double tol_crit = 1e-7;  // criticality residual tolerance
  int descent_iters = 300;
  std::vector<double> v_radii = {1.0, 10.0, 100.0};
  Exec exec = Exec::OpenMP;
  int max_pieces = 1 << 20;
  int probe_samples = 500;  // sign-condition probe
};

struct StabilityVerdict {
  VerdictStatus status = VerdictStatus::Inconclusive;
  SystemMode mode = SystemMode::Noncritical;
  Vector witness;      // full unknown vector on Fails, normalized
  double residual = 0; // re-verified witness residual, or best residual found
  std::string method;  // "face-enum" or "multistart"
  std::uint64_t seed = 0;
  std::string detail;
};

/// Independent re-verification of a Fails certificate: recomputes the
/// residual straight from the cone calculus and checks the normalization.
double verify_witness(const HomogeneousSystem& sys, const Vector& witness);

/// Decide whether the system admits a nontrivial solution.
/// Holds = only trivial solutions (exact for face-enum, at-confidence for
/// multistart); Fails = certificate found.
StabilityVerdict decide_system(const HomogeneousSystem& sys, const EngineConfig& cfg);

// ---------------------------------------------------------------------------
// Named tests
// ---------------------------------------------------------------------------

StabilityVerdict noncriticality_test(const ConicProgram& prog, const KKTPoint& pt,
                                     const EngineConfig& cfg = {});
StabilityVerdict x_isolated_calmness_test(const ConicProgram& prog, const KKTPoint& pt,
                                          const EngineConfig& cfg = {});

struct SkktVerdict {
  StabilityVerdict direct;        // full system in (u, v)
  StabilityVerdict m_isolated;    // route through the multiplier map
  StabilityVerdict noncritical;
  bool routes_comparable = false; // both routes reached a definite verdict
  bool routes_agree = false;
};

/// Direct decision plus the cross-check against the conjunction
/// (M isolated calm) and (noncritical). A definite disagreement between the
/// two routes is a hard error.
SkktVerdict skkt_isolated_calmness_test(const ConicProgram& prog, const KKTPoint& pt,
                                        const EngineConfig& cfg = {});

struct SoscResult {
  VerdictStatus status = VerdictStatus::Inconclusive;
  double min_value = 0;     // best feasible value of the quadratic form
  double feasibility = 0;   // critical-cone distance at the reported minimizer
  bool vacuous = false;     // no unit direction maps into the critical cone
  Vector witness;           // minimizer (Fails: the violating direction)
  std::uint64_t seed = 0;
  std::string detail;
};

/// Second-order sufficient condition: min of <d, Hess d> + Upsilon(g'd) over
/// unit d with g'd in the critical cone, by penalized multistart descent.
SoscResult sosc_test(const ConicProgram& prog, const KKTPoint& pt,
                     const EngineConfig& cfg = {}, double margin = 1e-8);

struct SignProbeResult {
  bool falsified = false;
  double min_product = 0;  // most negative <g'xi, zeta> among feasible pairs
  int pairs_tested = 0;
  int samples_skipped = 0;
  Vector witness_xi;
  Vector witness_zeta;
  bool tilde = false;
  std::uint64_t seed = 0;
};

/// Falsification probe for the sign condition on Sigma ∩ Gamma (or the
/// Gamma-tilde variant). Can only exhibit a violation, never certify.
SignProbeResult sigma_gamma_sign_probe(const ConicProgram& prog, const KKTPoint& pt,
                                       const EngineConfig& cfg = {}, bool tilde = false);

struct LadderLink {
  std::string name;
  bool ok = false;
  bool heuristic = false;  // probe/search result, not a proof
  std::string note;
};

struct LadderReport {
  std::vector<LadderLink> links;
  bool sufficient = false;
  std::string broken_at;  // first failed link, empty when all hold
};

struct ProbeConfig;  // perturbation probes configuration (probe_stats.hpp)

/// The sufficient-condition chain for strong calmness: noncriticality,
/// constraint subregularity (probe), relative-interior multiplier (search),
/// and the Sigma ∩ Gamma-tilde sign condition (probe).
LadderReport strong_calmness_sufficient(const ConicProgram& prog, const KKTPoint& pt,
                                        const EngineConfig& engine_cfg,
                                        const ProbeConfig& probe_cfg,
                                        double ri_margin = 1e-6);

}  // namespace calmkit
