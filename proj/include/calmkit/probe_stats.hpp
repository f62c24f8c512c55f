// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calmkit/parallel.hpp"
#include "calmkit/types.hpp"

namespace calmkit {

struct ProbeConfig {
  std::vector<double> radii = {1e-2, 1e-3, 1e-4};  // strictly decreasing
  int samples = 10000;                             // per radius, >= 100
  std::uint64_t seed = 0;
  double tol_den = 1e-12;        // ratios with smaller denominators are excluded
  int solver_budget = 200;       // iterations for embedded solvers
  double growth_threshold = 5.0; // max-ratio growth per radius decade => diverging
  Exec exec = Exec::OpenMP;

  void validate() const;
};

struct RadiusStats {
  double radius = 0;
  int samples = 0;  // valid ratios
  int skipped = 0;  // denominator below tol_den
  int dropped = 0;  // embedded solver failed
  double max_ratio = 0;
  double p99 = 0;
  double p90 = 0;
};

struct RatioStats {
  std::string probe;
  std::vector<RadiusStats> per_radius;
  double growth_per_decade = 1.0;      // of the max ratio (default classifier)
  double growth_p90_per_decade = 1.0;  // of the 90th percentile
  bool diverging = false;
  std::uint64_t seed = 0;
};

/// Per-sample outcome slot; written independently by each sample so that the
/// serial and OpenMP paths aggregate identically.
struct SampleOutcome {
  double ratio = 0;
  enum class State { Valid, Skipped, Dropped } state = State::Skipped;
};

/// Order-independent reduction of the per-sample slots into RatioStats.
RatioStats aggregate_ratios(const std::string& probe, const ProbeConfig& cfg,
                            const std::vector<std::vector<SampleOutcome>>& per_radius);

}  // namespace calmkit
