// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/multiplier.hpp"

#include <cmath>
#include <limits>

#include "calmkit/linalg.hpp"
#include "calmkit/rng.hpp"

namespace calmkit {

MultiplierSetRef make_multiplier_ref(const ConicProgram& prog, const KKTPoint& pt) {
  MultiplierSetRef ref;
  ref.prog = prog;
  ref.point = pt;
  ref.eta = prog.eval->grad_f(pt.x);
  ref.jac = prog.eval->jac_g(pt.x);
  ref.affine_op = ref.jac.transpose();
  return ref;
}

DistToSetResult dist_to_multiplier_set(const MultiplierSetRef& ref, const Vector& lambda,
                                       const DykstraConfig& cfg) {
  const Vector target = -ref.eta;
  const double scale = 1.0 + lambda.norm() + ref.point.lambda.norm();

  Vector x = lambda;
  Vector pinc = Vector::Zero(lambda.size());
  Vector qinc = Vector::Zero(lambda.size());
  double gap = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    Vector w1 = x + pinc;
    Vector ya = linalg::project_affine(ref.affine_op, target, w1);
    pinc = w1 - ya;
    Vector w2 = ya + qinc;
    Vector xn = project_onto_normal_cone(ref.point.face, w2);
    qinc = w2 - xn;
    gap = (xn - x).norm();
    x = xn;
    if (gap <= cfg.gap_tol * scale) break;
  }
  if (gap > cfg.gap_tol * scale) {
    throw Error("dist_to_multiplier_set",
                "Dykstra did not converge in " + std::to_string(cfg.max_iter) +
                    " iterations; last gap " + std::to_string(gap));
  }

  double aff_gap = (ref.affine_op * x - target).norm();
  double cone_gap = (x - project_onto_normal_cone(ref.point.face, x)).norm();
  if (aff_gap > cfg.member_tol * scale || cone_gap > cfg.member_tol * scale) {
    throw Error("dist_to_multiplier_set",
                "Dykstra limit not certified: affine gap " + std::to_string(aff_gap) +
                    ", cone gap " + std::to_string(cone_gap));
  }

  DistToSetResult out;
  out.nearest = x;
  out.dist = (lambda - x).norm();
  out.iterations = it + 1;
  return out;
}

// ---------------------------------------------------------------------------
// Relative-interior multiplier search
// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Facial margin of lambda in N_K(ybar), blockwise minimum. +inf where the
/// normal cone is a subspace or {0}; requires lambda to be (near) a member.
double facial_margin_impl(const FaceDescriptor& fd, const Vector& lambda) {
  const ProductCone& k = fd.cone;
  double margin = kInf;
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = fd.faces[static_cast<size_t>(b)];
    Vector lb = lambda.segment(k.offset(b), face.dim);
    switch (face.kind) {
      case ConeKind::Zero:
        break;  // N is the whole space
      case ConeKind::OrthantNonpos:
        for (Index i : face.orthant.strict) margin = std::min(margin, lb[i]);
        for (Index i : face.orthant.weak) margin = std::min(margin, lb[i]);
        break;
      case ConeKind::OrthantNonneg:
        for (Index i : face.orthant.strict) margin = std::min(margin, -lb[i]);
        for (Index i : face.orthant.weak) margin = std::min(margin, -lb[i]);
        break;
      case ConeKind::SecondOrder: {
        const SocFace& f = face.soc;
        const Index m = face.dim;
        switch (f.tag) {
          case SocCase::Interior:
            break;  // N = {0}: ri({0}) = {0}
          case SocCase::ApexZero:
          case SocCase::ApexPolarInterior:
          case SocCase::ApexPolarBoundary: {
            double tail = m > 1 ? lb.tail(m - 1).norm() : 0.0;
            margin = std::min(margin, -lb[0] - tail);
            break;
          }
          case SocCase::BoundaryZero:
          case SocCase::BoundaryActive: {
            Vector nu(m);
            nu[0] = -1.0;
            nu.tail(m - 1) = f.dir;
            nu /= std::sqrt(2.0);
            margin = std::min(margin, nu.dot(lb));
            break;
          }
        }
        break;
      }
      case ConeKind::Psd: {
        const PsdFace& f = face.psd;
        std::vector<Index> kernel = f.beta;
        kernel.insert(kernel.end(), f.gamma.begin(), f.gamma.end());
        if (kernel.empty()) break;  // N = {0}
        Matrix lt = f.basis.transpose() * smat(lb) * f.basis;
        Matrix kk(static_cast<Index>(kernel.size()), static_cast<Index>(kernel.size()));
        for (size_t i = 0; i < kernel.size(); ++i)
          for (size_t j = 0; j < kernel.size(); ++j)
            kk(static_cast<Index>(i), static_cast<Index>(j)) = lt(kernel[i], kernel[j]);
        margin = std::min(margin, -linalg::jacobi_eigh(kk).values.maxCoeff());
        break;
      }
    }
  }
  return margin;
}

/// Push lambda further into ri(N_K(ybar)): add mass along every degenerate
/// face direction whose slack is below target.
Vector boost_towards_ri(const FaceDescriptor& fd, const Vector& lambda, double target) {
  const ProductCone& k = fd.cone;
  Vector out = lambda;
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = fd.faces[static_cast<size_t>(b)];
    const Index off = k.offset(b);
    Vector lb = lambda.segment(off, face.dim);
    switch (face.kind) {
      case ConeKind::Zero:
        break;
      case ConeKind::OrthantNonpos:
        for (Index i : face.orthant.strict)
          if (lb[i] < target) out[off + i] += target - lb[i];
        for (Index i : face.orthant.weak)
          if (lb[i] < target) out[off + i] += target - lb[i];
        break;
      case ConeKind::OrthantNonneg:
        for (Index i : face.orthant.strict)
          if (-lb[i] < target) out[off + i] -= target + lb[i];
        for (Index i : face.orthant.weak)
          if (-lb[i] < target) out[off + i] -= target + lb[i];
        break;
      case ConeKind::SecondOrder: {
        const SocFace& f = face.soc;
        const Index m = face.dim;
        switch (f.tag) {
          case SocCase::Interior:
            break;
          case SocCase::ApexZero:
          case SocCase::ApexPolarInterior:
          case SocCase::ApexPolarBoundary: {
            double tail = m > 1 ? lb.tail(m - 1).norm() : 0.0;
            double slack = -lb[0] - tail;
            if (slack < target) out[off] -= target - slack;
            break;
          }
          case SocCase::BoundaryZero:
          case SocCase::BoundaryActive: {
            Vector nu(m);
            nu[0] = -1.0;
            nu.tail(m - 1) = f.dir;
            nu /= std::sqrt(2.0);
            double slack = nu.dot(lb);
            if (slack < target) out.segment(off, m) += (target - slack) * nu;
            break;
          }
        }
        break;
      }
      case ConeKind::Psd: {
        const PsdFace& f = face.psd;
        std::vector<Index> kernel = f.beta;
        kernel.insert(kernel.end(), f.gamma.begin(), f.gamma.end());
        if (kernel.empty()) break;
        Matrix lt = f.basis.transpose() * smat(lb) * f.basis;
        Matrix kk(static_cast<Index>(kernel.size()), static_cast<Index>(kernel.size()));
        for (size_t i = 0; i < kernel.size(); ++i)
          for (size_t j = 0; j < kernel.size(); ++j)
            kk(static_cast<Index>(i), static_cast<Index>(j)) = lt(kernel[i], kernel[j]);
        double slack = -linalg::jacobi_eigh(kk).values.maxCoeff();
        if (slack < target) {
          Matrix bump = Matrix::Zero(f.basis.rows(), f.basis.cols());
          for (Index i : kernel)
            bump += f.basis.col(i) * f.basis.col(i).transpose();
          out.segment(off, face.dim) -= (target - slack) * svec(bump);
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace

double ri_facial_margin(const MultiplierSetRef& ref, const Vector& lambda) {
  return facial_margin_impl(ref.point.face, lambda);
}

std::optional<Vector> find_ri_multiplier(const MultiplierSetRef& ref, double ri_margin,
                                         int max_rounds) {
  const Vector target_rhs = -ref.eta;
  const double scale = 1.0 + ref.point.lambda.norm();
  const double boost_target = std::max(1.0, 10.0 * ri_margin);

  auto certified = [&](const Vector& lam) {
    double aff = (ref.affine_op * lam - target_rhs).norm();
    double cone = (lam - project_onto_normal_cone(ref.point.face, lam)).norm();
    double s = 1.0 + lam.norm();
    return aff <= 1e-9 * s && cone <= 1e-9 * s &&
           facial_margin_impl(ref.point.face, lam) >= ri_margin;
  };

  Vector lam = ref.point.lambda;
  if (certified(lam)) return lam;
  for (int round = 0; round < max_rounds; ++round) {
    Vector mu = project_onto_normal_cone(ref.point.face, lam);
    mu = boost_towards_ri(ref.point.face, mu, boost_target);
    lam = linalg::project_affine(ref.affine_op, target_rhs, mu);
    if (certified(lam)) return lam;
  }
  (void)scale;
  return std::nullopt;
}

StabilityVerdict m_isolated_calmness_test(const ConicProgram& prog, const KKTPoint& pt,
                                          const EngineConfig& cfg) {
  return decide_system(make_system(prog, pt, SystemMode::MIsolated), cfg);
}

// ---------------------------------------------------------------------------
// Calmness probe for M through G_xbar
// ---------------------------------------------------------------------------

RatioStats calmness_probe_M(const MultiplierSetRef& ref, const ProbeConfig& cfg) {
  cfg.validate();
  const Index m = ref.prog.m();
  const Vector zbase = ref.point.y + ref.point.lambda;
  const Vector eta_bar = ref.eta;
  const Vector y_bar = ref.point.y;

  std::vector<std::vector<SampleOutcome>> slots(cfg.radii.size());
  for (size_t ri = 0; ri < cfg.radii.size(); ++ri) {
    slots[ri].assign(static_cast<size_t>(cfg.samples), {});
    const double radius = cfg.radii[ri];
    parallel_for(cfg.samples, [&, ri, radius](std::int64_t i) {
      SampleOutcome& slot = slots[ri][static_cast<size_t>(i)];
      Rng rng(Rng::derive(cfg.seed ^ 0x4da1be55ULL,
                          static_cast<std::uint64_t>(ri) * static_cast<std::uint64_t>(cfg.samples) +
                              static_cast<std::uint64_t>(i)));
      // reverse-engineer a member of G_xbar(eta', y'): split a perturbed
      // point of gph N_K and read off the parameters it solves for
      Vector w = zbase + rng.ball(m, radius);
      Vector y = ref.prog.cone.project(w);
      Vector lam = w - y;
      Vector eta = -(ref.affine_op * lam);
      double den = std::sqrt((eta - eta_bar).squaredNorm() + (y - y_bar).squaredNorm());
      if (den < cfg.tol_den) {
        slot.state = SampleOutcome::State::Skipped;
        return;
      }
      try {
        DistToSetResult d = dist_to_multiplier_set(ref, lam);
        slot.ratio = d.dist / den;
        slot.state = SampleOutcome::State::Valid;
      } catch (const Error&) {
        slot.state = SampleOutcome::State::Dropped;
      }
    }, cfg.exec);
  }
  return aggregate_ratios("m-calmness", cfg, slots);
}

// ---------------------------------------------------------------------------
// Metric subregularity probe for g(.) - K
// ---------------------------------------------------------------------------

RatioStats subregularity_probe(const ConicProgram& prog, const Vector& xbar,
                               const ProbeConfig& cfg) {
  cfg.validate();
  const Index n = prog.n;

  auto infeas = [&](const Vector& x) { return prog.cone.feasibility_gap(prog.eval->g(x)); };

  std::vector<std::vector<SampleOutcome>> slots(cfg.radii.size());
  for (size_t ri = 0; ri < cfg.radii.size(); ++ri) {
    slots[ri].assign(static_cast<size_t>(cfg.samples), {});
    const double radius = cfg.radii[ri];
    parallel_for(cfg.samples, [&, ri, radius](std::int64_t i) {
      SampleOutcome& slot = slots[ri][static_cast<size_t>(i)];
      Rng rng(Rng::derive(cfg.seed ^ 0x5b52e6a7ULL,
                          static_cast<std::uint64_t>(ri) * static_cast<std::uint64_t>(cfg.samples) +
                              static_cast<std::uint64_t>(i)));
      Vector x = xbar + rng.ball(n, radius);
      double den = infeas(x);
      if (den < cfg.tol_den) {
        slot.state = SampleOutcome::State::Skipped;
        return;
      }
      // Gauss-Newton feasibility restoration estimates dist(x, g^{-1}(K)).
      // The target is relative to the sample's own infeasibility: an absolute
      // target would zero out the numerator near the reference point and mask
      // the divergence the probe exists to detect.
      Vector xr = x;
      double gap = den;
      bool ok = false;
      int stall = 0;
      for (int it = 0; it < cfg.solver_budget; ++it) {
        Vector gx = prog.eval->g(xr);
        Vector r = gx - prog.cone.project(gx);
        if (r.norm() <= std::max(1e-6 * den, 1e-13 * (1.0 + gx.norm()))) {
          ok = true;
          break;
        }
        Vector step = linalg::least_squares(prog.eval->jac_g(xr), -r);
        xr += step;
        double newgap = infeas(xr);
        if (newgap >= gap * (1.0 - 1e-12)) {
          if (++stall > 20) break;
        } else {
          stall = 0;
        }
        gap = newgap;
      }
      if (!ok) {
        slot.state = SampleOutcome::State::Dropped;
        return;
      }
      slot.ratio = (xr - x).norm() / den;
      slot.state = SampleOutcome::State::Valid;
    }, cfg.exec);
  }
  return aggregate_ratios("subregularity", cfg, slots);
}

}  // namespace calmkit
