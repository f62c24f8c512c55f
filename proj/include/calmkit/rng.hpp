// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "calmkit/types.hpp"

namespace calmkit {

// Splitmix64 generator. Self-contained so that streams are identical across
// platforms and standard libraries; every sampling loop derives one stream
// per sample index from a base seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vector gaussian_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = gaussian();
    return v;
  }

  /// Uniform in the closed Euclidean ball of the given radius.
  Vector ball(Index n, double radius) {
    Vector v = gaussian_vector(n);
    double nrm = v.norm();
    if (nrm == 0.0) return Vector::Zero(n);
    double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(n));
    return (r / nrm) * v;
  }

  /// Uniform on the unit sphere.
  Vector sphere(Index n) {
    Vector v = gaussian_vector(n);
    double nrm = v.norm();
    while (nrm < 1e-12) {
      v = gaussian_vector(n);
      nrm = v.norm();
    }
    return v / nrm;
  }

  /// Independent stream for sample `idx` of the stream seeded by `seed`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t idx) {
    Rng r(seed ^ (0x100000001b3ULL * (idx + 1)));
    return r.next_u64();
  }

 private:
  std::uint64_t state_;
};

}  // namespace calmkit
