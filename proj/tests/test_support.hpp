// Shared helpers for the calmkit test suites.
#pragma once

#include <string>
#include <vector>

#include "calmkit/corpus.hpp"
#include "calmkit/report.hpp"
#include "calmkit/rng.hpp"

namespace calmkit::testing {

struct LoadedPoint {
  ConicProgram prog;
  KKTPoint point;
};

inline ParsedProblem load_problem(const std::string& name) {
  return parse_problem_json(corpus::problem_json(name), name);
}

inline LoadedPoint load_point(const std::string& prob, const std::string& point) {
  ParsedProblem pp = load_problem(prob);
  const NamedPoint& np = pp.point(point);
  return {pp.program, validate_kkt_point(pp.program, np.x, np.lambda)};
}

/// Small random polyhedral instance (mixed zero/orthant blocks) with a
/// constructed KKT point at x = 0: inactive coordinates get negative slack,
/// active ones get a multiplier that is zero on a random subset (degenerate
/// faces on purpose).
struct PolyhedralInstance {
  ConicProgram prog;
  Vector x;
  Vector lambda;
};

inline PolyhedralInstance random_polyhedral_instance(std::uint64_t seed) {
  Rng rng(seed);
  const Index n = 1 + static_cast<Index>(rng.next_u64() % 4);

  std::vector<ConeBlock> blocks;
  Index m = 0;
  const int nblocks = 1 + static_cast<int>(rng.next_u64() % 2);
  for (int b = 0; b < nblocks; ++b) {
    Index dim = 1 + static_cast<Index>(rng.next_u64() % 3);
    switch (rng.next_u64() % 3) {
      case 0: blocks.push_back(ConeBlock::zero(dim)); break;
      case 1: blocks.push_back(ConeBlock::orthant_nonpos(dim)); break;
      default: blocks.push_back(ConeBlock::orthant_nonneg(dim)); break;
    }
    m += dim;
  }
  ProductCone cone(blocks);

  const bool degenerate_hessian = rng.uniform() < 0.4;
  Matrix q(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) q(i, j) = q(j, i) = rng.gaussian();

  std::vector<QuadraticEvaluator::Row> rows(static_cast<size_t>(m));
  Vector y0(m), lam(m);
  Index at = 0;
  for (const ConeBlock& blk : blocks) {
    for (Index i = 0; i < blk.dim; ++i, ++at) {
      QuadraticEvaluator::Row row;
      row.a = Matrix::Zero(n, n);
      if (rng.uniform() < 0.7) {
        for (Index p = 0; p < n; ++p)
          for (Index r = 0; r <= p; ++r) row.a(p, r) = row.a(r, p) = rng.gaussian();
      }
      row.b = rng.gaussian_vector(n);
      double sign = blk.kind == ConeKind::OrthantNonpos ? -1.0 : 1.0;
      switch (blk.kind) {
        case ConeKind::Zero:
          row.d = 0.0;
          lam[at] = rng.gaussian();  // any multiplier value
          break;
        case ConeKind::OrthantNonpos:
        case ConeKind::OrthantNonneg:
          if (rng.uniform() < 0.4) {
            row.d = sign * (0.5 + rng.uniform());  // strictly feasible
            lam[at] = 0.0;
          } else {
            row.d = 0.0;  // active
            lam[at] = rng.uniform() < 0.5 ? 0.0 : -sign * (0.2 + rng.uniform());
          }
          break;
        default:
          break;
      }
      y0[at] = row.d;
      rows[static_cast<size_t>(at)] = std::move(row);
    }
  }

  // choose c so that x = 0 is stationary for the chosen multiplier; a
  // degenerate variant cancels the Lagrangian Hessian entirely, which makes
  // critical multipliers likely
  if (degenerate_hessian) {
    q.setZero();
    for (Index i = 0; i < m; ++i) q -= lam[i] * rows[static_cast<size_t>(i)].a;
  }
  Matrix jac0(m, n);
  for (Index i = 0; i < m; ++i) jac0.row(i) = rows[static_cast<size_t>(i)].b.transpose();
  Vector c = -jac0.transpose() * lam;

  PolyhedralInstance inst;
  inst.prog.n = n;
  inst.prog.cone = std::move(cone);
  inst.prog.eval = std::make_shared<QuadraticEvaluator>(std::move(q), std::move(c), 0.0,
                                                        std::move(rows));
  inst.x = Vector::Zero(n);
  inst.lambda = lam;
  return inst;
}

}  // namespace calmkit::testing
