// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/perturbation.hpp"

#include <cmath>
#include <sstream>

#include "calmkit/linalg.hpp"
#include "calmkit/rng.hpp"

namespace calmkit {

ReversePerturbation reverse_perturbation(const ConicProgram& prog, const Vector& x,
                                         const Vector& lambda) {
  Vector gx = prog.eval->g(x);
  Matrix adj = prog.eval->jac_g(x).transpose();
  Vector a0 = prog.eval->grad_f(x) + adj * lambda;
  Vector b = gx - prog.cone.project(gx + lambda);

  ReversePerturbation out;
  out.b = b;
  out.a = a0 + adj * b;
  out.x = x;
  out.lambda = lambda + b;
  out.residual = kkt_residual_norm(prog, out.x, out.lambda, out.a, out.b);
  return out;
}

// ---------------------------------------------------------------------------
// Generalized Jacobian of the projection
// ---------------------------------------------------------------------------

namespace {

Matrix soc_smooth_jacobian(const Vector& z) {
  const Index m = z.size();
  const double a = z.tail(m - 1).norm();
  const Vector w = z.tail(m - 1) / a;
  Matrix j(m, m);
  j(0, 0) = 0.5;
  j.block(0, 1, 1, m - 1) = 0.5 * w.transpose();
  j.block(1, 0, m - 1, 1) = 0.5 * w;
  j.block(1, 1, m - 1, m - 1) =
      0.5 * (1.0 + z[0] / a) * Matrix::Identity(m - 1, m - 1) -
      0.5 * (z[0] / a) * w * w.transpose();
  return j;
}

}  // namespace

Matrix projection_generalized_jacobian(const ProductCone& cone, const Vector& z) {
  const Index m = cone.total_dim();
  if (z.size() != m) throw Error("projection_generalized_jacobian", "dimension mismatch");
  Matrix v = Matrix::Zero(m, m);
  for (Index b = 0; b < cone.num_blocks(); ++b) {
    const ConeBlock& blk = cone.block(b);
    const Index off = cone.offset(b);
    Vector zb = z.segment(off, blk.dim);
    switch (blk.kind) {
      case ConeKind::Zero:
        break;
      case ConeKind::OrthantNonpos:
        // tie at zero treated as inactive (derivative one)
        for (Index i = 0; i < blk.dim; ++i)
          if (zb[i] <= 0.0) v(off + i, off + i) = 1.0;
        break;
      case ConeKind::OrthantNonneg:
        for (Index i = 0; i < blk.dim; ++i)
          if (zb[i] >= 0.0) v(off + i, off + i) = 1.0;
        break;
      case ConeKind::SecondOrder: {
        if (blk.dim == 1) {
          if (zb[0] >= 0.0) v(off, off) = 1.0;
          break;
        }
        double tail = zb.tail(blk.dim - 1).norm();
        if (zb[0] >= tail) {
          v.block(off, off, blk.dim, blk.dim).setIdentity();
        } else if (zb[0] <= -tail) {
          // zero block
        } else {
          v.block(off, off, blk.dim, blk.dim) = soc_smooth_jacobian(zb);
        }
        break;
      }
      case ConeKind::Psd: {
        Matrix zm = smat(zb);
        linalg::EigResult e = linalg::jacobi_eigh(zm);
        const Index order = blk.order;
        Matrix omega(order, order);
        for (Index i = 0; i < order; ++i) {
          for (Index j = 0; j < order; ++j) {
            double si = e.values[i], sj = e.values[j];
            double pi = std::max(si, 0.0), pj = std::max(sj, 0.0);
            if (std::abs(si - sj) > 1e-14 * (1.0 + std::abs(si) + std::abs(sj))) {
              omega(i, j) = (pi - pj) / (si - sj);
            } else {
              omega(i, j) = si >= 0.0 ? 1.0 : 0.0;  // tie: inactive side
            }
          }
        }
        // assemble the svec-coordinates operator column by column
        for (Index col = 0; col < blk.dim; ++col) {
          Vector unit = Vector::Zero(blk.dim);
          unit[col] = 1.0;
          Matrix h = e.vectors.transpose() * smat(unit) * e.vectors;
          Matrix dh = omega.cwiseProduct(h);
          v.block(off, off, blk.dim, blk.dim).col(col) =
              svec(e.vectors * dh * e.vectors.transpose());
        }
        break;
      }
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Semismooth Newton
// ---------------------------------------------------------------------------

NewtonResult solve_perturbed_kkt(const ConicProgram& prog, const Vector& a,
                                 const Vector& b, const Vector& x0,
                                 const Vector& lambda0, const NewtonConfig& cfg) {
  const Index n = prog.n;
  const Index m = prog.m();
  if (a.size() != n || b.size() != m || x0.size() != n || lambda0.size() != m)
    throw Error("solve_perturbed_kkt", "dimension mismatch");

  auto residual_vec = [&](const Vector& x, const Vector& lam) {
    auto [r1, r2] = kkt_residual(prog, x, lam, a, b);
    Vector r(n + m);
    r << r1, r2;
    return r;
  };

  const double tol = cfg.tol * (1.0 + a.norm() + b.norm());
  NewtonResult out;
  out.x = x0;
  out.lambda = lambda0;
  Vector r = residual_vec(out.x, out.lambda);
  out.residual = r.norm();
  if (out.residual <= tol) {
    out.converged = true;
    return out;
  }

  double last_window_best = out.residual;
  for (int it = 0; it < cfg.max_iter; ++it) {
    Matrix jg = prog.eval->jac_g(out.x);
    Matrix hl = lagrangian_hessian(prog, out.x, out.lambda);
    Vector z = prog.eval->g(out.x) - b + out.lambda;
    Matrix v = projection_generalized_jacobian(prog.cone, z);

    Matrix jac(n + m, n + m);
    jac.block(0, 0, n, n) = hl;
    jac.block(0, n, n, m) = jg.transpose();
    jac.block(n, 0, m, n) = (Matrix::Identity(m, m) - v) * jg;
    jac.block(n, n, m, m) = -v;

    // plain Newton step, Levenberg-Marquardt fallback when it is poor
    Vector step;
    {
      Eigen::FullPivLU<Matrix> lu(jac);
      lu.setThreshold(1e-12);
      bool usable = lu.isInvertible();
      if (usable) {
        step = lu.solve(-r);
        usable = (jac * step + r).norm() <= 1e-8 * (1.0 + r.norm());
      }
      if (!usable) {
        double mu = 1e-10 * (1.0 + jac.squaredNorm());
        for (int k = 0; k < 12; ++k) {
          Matrix lhs = jac.transpose() * jac + mu * Matrix::Identity(n + m, n + m);
          step = lhs.ldlt().solve(-jac.transpose() * r);
          Vector xs = out.x + step.head(n);
          Vector ls = out.lambda + step.tail(m);
          if (residual_vec(xs, ls).norm() < r.norm()) break;
          mu *= 10.0;
        }
      }
    }

    // residual-decrease line search
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      Vector xs = out.x + t * step.head(n);
      Vector lamt = out.lambda + t * step.tail(m);
      Vector rs = residual_vec(xs, lamt);
      if (rs.norm() < r.norm() * (1.0 - 1e-4 * t) || rs.norm() <= tol) {
        out.x = xs;
        out.lambda = lamt;
        r = rs;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    out.iterations = it + 1;
    out.residual = r.norm();
    if (out.residual <= tol) {
      out.converged = true;
      return out;
    }
    if (!accepted) {
      std::ostringstream os;
      os << "line search failed at iteration " << it << " with residual " << out.residual;
      out.trace = os.str();
      return out;
    }
    if ((it + 1) % cfg.stagnation_window == 0) {
      if (last_window_best - out.residual < cfg.stagnation_decrease) {
        std::ostringstream os;
        os << "stagnation: residual decrease below " << cfg.stagnation_decrease
           << " over " << cfg.stagnation_window << " steps (residual " << out.residual << ")";
        out.trace = os.str();
        return out;
      }
      last_window_best = out.residual;
    }
  }
  std::ostringstream os;
  os << "iteration budget exhausted with residual " << out.residual;
  out.trace = os.str();
  return out;
}

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

namespace {

enum class ProbeKind { ErrorBound, StrongCalmness, Pseudo };

RatioStats run_point_probe(const MultiplierSetRef& ref, const ProbeConfig& cfg,
                           ProbeKind kind, bool direct_sampling) {
  cfg.validate();
  const ConicProgram& prog = ref.prog;
  const Index n = prog.n;
  const Index m = prog.m();
  const Vector& xbar = ref.point.x;
  const Vector& lambdabar = ref.point.lambda;

  const char* name = kind == ProbeKind::ErrorBound ? "error-bound"
                     : kind == ProbeKind::StrongCalmness
                         ? (direct_sampling ? "strong-calmness-direct" : "strong-calmness")
                         : "pseudo-isolated";
  const std::uint64_t salt = kind == ProbeKind::ErrorBound ? 0xe11be11bULL
                             : kind == ProbeKind::StrongCalmness ? 0x5c5c5c5cULL
                                                                 : 0x95e0d05aULL;

  std::vector<std::vector<SampleOutcome>> slots(cfg.radii.size());
  for (size_t ri = 0; ri < cfg.radii.size(); ++ri) {
    slots[ri].assign(static_cast<size_t>(cfg.samples), {});
    const double radius = cfg.radii[ri];
    parallel_for(cfg.samples, [&, ri, radius](std::int64_t i) {
      SampleOutcome& slot = slots[ri][static_cast<size_t>(i)];
      Rng rng(Rng::derive(cfg.seed ^ salt,
                          static_cast<std::uint64_t>(ri) * static_cast<std::uint64_t>(cfg.samples) +
                              static_cast<std::uint64_t>(i)));
      Vector d = rng.ball(n + m, radius);
      Vector x = xbar + d.head(n);
      Vector lam = lambdabar + d.tail(m);

      double num = 0, den = 0;
      Vector lam_for_dist;
      if (kind == ProbeKind::ErrorBound) {
        auto [r1, r2] = kkt_residual(prog, x, lam, Vector::Zero(n), Vector::Zero(m));
        den = std::sqrt(r1.squaredNorm() + r2.squaredNorm());
        lam_for_dist = lam;
      } else if (!direct_sampling) {
        ReversePerturbation rp = reverse_perturbation(prog, x, lam);
        den = std::sqrt(rp.a.squaredNorm() + rp.b.squaredNorm());
        lam_for_dist = rp.lambda;
      } else {
        // draw (a, b) directly and solve; slower and can fail, kept for
        // comparison with the reverse construction
        Vector a = rng.ball(n, radius);
        Vector b = rng.ball(m, radius);
        NewtonConfig ncfg;
        ncfg.max_iter = cfg.solver_budget;
        NewtonResult nres = solve_perturbed_kkt(prog, a, b, xbar, lambdabar, ncfg);
        if (!nres.converged) {
          slot.state = SampleOutcome::State::Dropped;
          return;
        }
        double locality = (nres.x - xbar).norm() + (nres.lambda - lambdabar).norm();
        if (locality > 100.0 * radius) {  // left the neighborhood the bound quantifies over
          slot.state = SampleOutcome::State::Skipped;
          return;
        }
        x = nres.x;
        lam_for_dist = nres.lambda;
        den = std::sqrt(a.squaredNorm() + b.squaredNorm());
      }

      if (den < cfg.tol_den) {
        slot.state = SampleOutcome::State::Skipped;
        return;
      }
      try {
        num = (x - xbar).norm();
        if (kind != ProbeKind::Pseudo) {
          num += dist_to_multiplier_set(ref, lam_for_dist).dist;
        }
      } catch (const Error&) {
        slot.state = SampleOutcome::State::Dropped;
        return;
      }
      slot.ratio = num / den;
      slot.state = SampleOutcome::State::Valid;
    }, cfg.exec);
  }
  return aggregate_ratios(name, cfg, slots);
}

}  // namespace

RatioStats error_bound_probe(const MultiplierSetRef& ref, const ProbeConfig& cfg) {
  return run_point_probe(ref, cfg, ProbeKind::ErrorBound, false);
}

RatioStats strong_calmness_probe(const MultiplierSetRef& ref, const ProbeConfig& cfg,
                                 bool direct_sampling) {
  return run_point_probe(ref, cfg, ProbeKind::StrongCalmness, direct_sampling);
}

RatioStats pseudo_isolated_probe(const MultiplierSetRef& ref, const ProbeConfig& cfg) {
  return run_point_probe(ref, cfg, ProbeKind::Pseudo, false);
}

EquivalenceReport equivalence_experiment(const MultiplierSetRef& ref,
                                         const ProbeConfig& cfg) {
  EquivalenceReport rep;
  rep.error_bound = error_bound_probe(ref, cfg);
  rep.strong_calmness = strong_calmness_probe(ref, cfg);
  rep.pseudo_isolated = pseudo_isolated_probe(ref, cfg);
  rep.m_calmness = calmness_probe_M(ref, cfg);

  rep.error_bound_equiv_ok = rep.error_bound.diverging == rep.strong_calmness.diverging;
  bool decomposition_bounded = !rep.pseudo_isolated.diverging && !rep.m_calmness.diverging;
  rep.decomposition_equiv_ok = (!rep.strong_calmness.diverging) == decomposition_bounded;

  std::ostringstream os;
  os << "error-bound " << (rep.error_bound.diverging ? "diverging" : "bounded")
     << ", strong-calmness " << (rep.strong_calmness.diverging ? "diverging" : "bounded")
     << ", pseudo-isolated " << (rep.pseudo_isolated.diverging ? "diverging" : "bounded")
     << ", m-calmness " << (rep.m_calmness.diverging ? "diverging" : "bounded");
  if (!rep.error_bound_equiv_ok)
    os << "; VIOLATION: error bound and strong calmness disagree";
  if (!rep.decomposition_equiv_ok)
    os << "; VIOLATION: strong calmness does not match pseudo-isolated + M-calmness";
  rep.detail = os.str();
  return rep;
}

}  // namespace calmkit
