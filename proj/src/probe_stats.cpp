// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/probe_stats.hpp"

#include <algorithm>
#include <cmath>

namespace calmkit {

void ProbeConfig::validate() const {
  if (radii.empty()) throw Error("ProbeConfig", "no radii");
  for (size_t i = 1; i < radii.size(); ++i) {
    if (!(radii[i] < radii[i - 1]))
      throw Error("ProbeConfig", "radii must be strictly decreasing");
  }
  for (double r : radii) {
    if (!(r > 0)) throw Error("ProbeConfig", "radii must be positive");
  }
  if (samples < 100) throw Error("ProbeConfig", "need at least 100 samples per radius");
}

namespace {

double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  size_t idx = static_cast<size_t>(
      std::ceil(q * static_cast<double>(sorted.size())));
  if (idx == 0) idx = 1;
  if (idx > sorted.size()) idx = sorted.size();
  return sorted[idx - 1];
}

}  // namespace

RatioStats aggregate_ratios(const std::string& probe, const ProbeConfig& cfg,
                            const std::vector<std::vector<SampleOutcome>>& per_radius) {
  RatioStats st;
  st.probe = probe;
  st.seed = cfg.seed;
  for (size_t ri = 0; ri < per_radius.size(); ++ri) {
    RadiusStats rs;
    rs.radius = cfg.radii[ri];
    std::vector<double> ratios;
    ratios.reserve(per_radius[ri].size());
    for (const SampleOutcome& s : per_radius[ri]) {
      switch (s.state) {
        case SampleOutcome::State::Valid:
          ratios.push_back(s.ratio);
          break;
        case SampleOutcome::State::Skipped:
          ++rs.skipped;
          break;
        case SampleOutcome::State::Dropped:
          ++rs.dropped;
          break;
      }
    }
    std::sort(ratios.begin(), ratios.end());
    rs.samples = static_cast<int>(ratios.size());
    rs.max_ratio = ratios.empty() ? 0.0 : ratios.back();
    rs.p99 = nearest_rank(ratios, 0.99);
    rs.p90 = nearest_rank(ratios, 0.90);
    st.per_radius.push_back(rs);
  }

  // growth per factor-of-ten shrink of the radius, between the largest and
  // smallest radii that produced valid samples
  const RadiusStats* first = nullptr;
  const RadiusStats* last = nullptr;
  for (const RadiusStats& rs : st.per_radius) {
    if (rs.samples > 0) {
      if (!first) first = &rs;
      last = &rs;
    }
  }
  st.growth_per_decade = 1.0;
  st.growth_p90_per_decade = 1.0;
  if (first && last && first != last) {
    double decades = std::log10(first->radius / last->radius);
    if (decades > 0) {
      if (first->max_ratio > 0)
        st.growth_per_decade =
            std::pow(last->max_ratio / first->max_ratio, 1.0 / decades);
      if (first->p90 > 0)
        st.growth_p90_per_decade = std::pow(last->p90 / first->p90, 1.0 / decades);
    }
  }
  // classification uses the p90 growth: the max ratio is set by the single
  // sample nearest the degenerate set and fluctuates by large factors across
  // seeds, while the percentile carries the same 1/r signal concentrated
  st.diverging = st.growth_p90_per_decade >= cfg.growth_threshold;
  return st;
}

}  // namespace calmkit
