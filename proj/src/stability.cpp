// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/stability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "calmkit/linalg.hpp"
#include "calmkit/multiplier.hpp"
#include "calmkit/probe_stats.hpp"
#include "calmkit/rng.hpp"

namespace calmkit {

const char* to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::Holds: return "holds";
    case VerdictStatus::Fails: return "fails";
    case VerdictStatus::Inconclusive: return "inconclusive";
  }
  return "?";
}

const char* to_string(SystemMode m) {
  switch (m) {
    case SystemMode::Noncritical: return "noncritical";
    case SystemMode::XIsolated: return "x-isolated";
    case SystemMode::MIsolated: return "m-isolated";
    case SystemMode::SkktIsolated: return "skkt-isolated";
  }
  return "?";
}

Index HomogeneousSystem::unknown_dim() const {
  switch (mode) {
    case SystemMode::Noncritical:
    case SystemMode::SkktIsolated: return n + m;
    case SystemMode::XIsolated: return n;
    case SystemMode::MIsolated: return m;
  }
  return 0;
}

Vector HomogeneousSystem::residual(const Vector& u) const {
  if (u.size() != unknown_dim()) throw Error("HomogeneousSystem", "unknown has wrong size");
  Vector r1, y, hdir;
  switch (mode) {
    case SystemMode::Noncritical:
    case SystemMode::SkktIsolated: {
      Vector xi = u.head(n);
      Vector v = u.tail(m);
      r1 = hess * xi + jac.transpose() * v;
      y = jac * xi;
      hdir = y + v;
      break;
    }
    case SystemMode::XIsolated: {
      r1 = hess * u;
      y = jac * u;
      hdir = y;
      break;
    }
    case SystemMode::MIsolated: {
      r1 = jac.transpose() * u;
      y = Vector::Zero(m);
      hdir = u;
      break;
    }
  }
  Vector r2 = y - proj_dirderiv(face, hdir);
  Vector out(r1.size() + r2.size());
  out << r1, r2;
  return out;
}

double HomogeneousSystem::constrained_norm(const Vector& u) const {
  switch (mode) {
    case SystemMode::Noncritical:
    case SystemMode::XIsolated: return u.head(n).norm();
    case SystemMode::MIsolated:
    case SystemMode::SkktIsolated: return u.norm();
  }
  return 0;
}

HomogeneousSystem make_system(const ConicProgram& prog, const KKTPoint& pt,
                              SystemMode mode) {
  HomogeneousSystem sys;
  sys.hess = lagrangian_hessian(prog, pt.x, pt.lambda);
  sys.jac = prog.eval->jac_g(pt.x);
  sys.face = pt.face;
  sys.mode = mode;
  sys.n = prog.n;
  sys.m = prog.m();
  return sys;
}

double verify_witness(const HomogeneousSystem& sys, const Vector& witness) {
  double cn = sys.constrained_norm(witness);
  if (std::abs(cn - 1.0) > 1e-6) {
    throw Error("verify_witness", "witness not normalized: constrained norm " +
                                      std::to_string(cn));
  }
  return sys.residual(witness).norm();
}

// ---------------------------------------------------------------------------
// Face enumeration (exact, polyhedral cones only)
// ---------------------------------------------------------------------------

namespace {

struct LinearizedSystem {
  Matrix l1;  // r1 rows
  Matrix my;  // Y map
  Matrix mh;  // Hdir map
  std::vector<Index> interest;
};

LinearizedSystem linearize(const HomogeneousSystem& sys) {
  LinearizedSystem ls;
  const Index n = sys.n, m = sys.m, d = sys.unknown_dim();
  ls.l1.resize(n, d);
  ls.my.resize(m, d);
  ls.mh.resize(m, d);
  switch (sys.mode) {
    case SystemMode::Noncritical:
    case SystemMode::SkktIsolated:
      ls.l1 << sys.hess, sys.jac.transpose();
      ls.my << sys.jac, Matrix::Zero(m, m);
      ls.mh << sys.jac, Matrix::Identity(m, m);
      break;
    case SystemMode::XIsolated:
      ls.l1 = sys.hess;
      ls.my = sys.jac;
      ls.mh = sys.jac;
      break;
    case SystemMode::MIsolated:
      ls.l1 = sys.jac.transpose();
      ls.my = Matrix::Zero(m, m);
      ls.mh = Matrix::Identity(m, m);
      break;
  }
  Index interest_count =
      (sys.mode == SystemMode::Noncritical || sys.mode == SystemMode::XIsolated) ? n : d;
  for (Index i = 0; i < interest_count; ++i) ls.interest.push_back(i);
  return ls;
}

struct KinkCoord {
  Index coord;
  bool nonpos;
};

StabilityVerdict face_enum_decide(const HomogeneousSystem& sys, const EngineConfig& cfg) {
  if (!sys.face.cone.polyhedral()) {
    throw Error("decide_system", "face-enum requested on a non-polyhedral cone");
  }
  const Index d = sys.unknown_dim();
  LinearizedSystem ls = linearize(sys);

  std::vector<Vector> base_rows;
  for (Index i = 0; i < ls.l1.rows(); ++i) base_rows.push_back(ls.l1.row(i));
  std::vector<KinkCoord> kinks;
  const ProductCone& k = sys.face.cone;
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = sys.face.faces[static_cast<size_t>(b)];
    const Index off = k.offset(b);
    switch (face.kind) {
      case ConeKind::Zero:
        for (Index i = 0; i < face.dim; ++i) base_rows.push_back(ls.my.row(off + i));
        break;
      case ConeKind::OrthantNonpos:
      case ConeKind::OrthantNonneg: {
        bool nonpos = face.kind == ConeKind::OrthantNonpos;
        for (Index i : face.orthant.inactive)
          base_rows.push_back(ls.my.row(off + i) - ls.mh.row(off + i));
        for (Index i : face.orthant.strict) base_rows.push_back(ls.my.row(off + i));
        for (Index i : face.orthant.weak) kinks.push_back({off + i, nonpos});
        break;
      }
      default:
        throw Error("decide_system", "face-enum on non-polyhedral block");
    }
  }

  const size_t npieces = size_t{1} << kinks.size();
  if (npieces > static_cast<size_t>(cfg.max_pieces)) {
    throw Error("decide_system", "face enumeration needs " + std::to_string(npieces) +
                                     " pieces, over the limit");
  }

  StabilityVerdict verdict;
  verdict.mode = sys.mode;
  verdict.method = "face-enum";
  verdict.seed = cfg.seed;

  const Index base_count = static_cast<Index>(base_rows.size());
  const Index kink_count = static_cast<Index>(kinks.size());

  for (size_t piece = 0; piece < npieces; ++piece) {
    Matrix eq(base_count + kink_count, d);
    for (Index i = 0; i < base_count; ++i) eq.row(i) = base_rows[static_cast<size_t>(i)];
    Matrix ineq(kink_count, d);
    for (Index ki = 0; ki < kink_count; ++ki) {
      const KinkCoord& kc = kinks[static_cast<size_t>(ki)];
      bool identity_side = ((piece >> ki) & 1) == 0;
      // the identity piece keeps s * Hdir <= 0, where s is the orthant
      // orientation; the constant piece takes the other side and kills Y
      double s = kc.nonpos ? 1.0 : -1.0;
      if (identity_side) {
        eq.row(base_count + ki) = ls.my.row(kc.coord) - ls.mh.row(kc.coord);
        ineq.row(ki) = -s * ls.mh.row(kc.coord);
      } else {
        eq.row(base_count + ki) = ls.my.row(kc.coord);
        ineq.row(ki) = s * ls.mh.row(kc.coord);
      }
    }

    Matrix kernel = linalg::kernel_basis(eq);
    if (kernel.cols() == 0) continue;

    Matrix ib(static_cast<Index>(ls.interest.size()), kernel.cols());
    for (size_t i = 0; i < ls.interest.size(); ++i)
      ib.row(static_cast<Index>(i)) = kernel.row(ls.interest[i]);
    if (ib.cwiseAbs().maxCoeff() <= 1e-9) continue;

    Vector candidate;
    bool found = false;
    if (kink_count == 0) {
      Index best_col = 0;
      ib.colwise().norm().maxCoeff(&best_col);
      candidate = kernel.col(best_col);
      found = true;
    } else {
      Matrix gb = ineq * kernel;
      for (Index j = 0; j < ib.rows() && !found; ++j) {
        for (double sgn : {1.0, -1.0}) {
          Matrix a(gb.rows() + 1, gb.cols());
          a.topRows(gb.rows()) = gb;
          a.bottomRows(1) = sgn * ib.row(j);
          Vector rhs = Vector::Zero(a.rows());
          rhs[a.rows() - 1] = 1.0;
          Vector c;
          if (linalg::lp_feasible(a, rhs, &c)) {
            candidate = kernel * c;
            found = true;
            break;
          }
        }
      }
    }
    if (!found) continue;

    double cn = sys.constrained_norm(candidate);
    if (cn <= 1e-9) continue;
    candidate /= cn;
    double res = sys.residual(candidate).norm();
    if (res <= cfg.tol_fail) {
      verdict.status = VerdictStatus::Fails;
      verdict.witness = candidate;
      verdict.residual = res;
      verdict.detail = "certificate from piece " + std::to_string(piece);
      return verdict;
    }
  }

  verdict.status = VerdictStatus::Holds;
  verdict.residual = 0;
  verdict.detail = "exact: no linear piece admits a nontrivial solution";
  return verdict;
}

// ---------------------------------------------------------------------------
// Multistart projected descent
// ---------------------------------------------------------------------------

double numeric_descent(const std::function<double(const Vector&)>& f, Vector& p,
                       int max_iters) {
  const Index d = p.size();
  double fp = f(p);
  double step = 1.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector grad(d);
    for (Index i = 0; i < d; ++i) {
      double h = 1e-7 * (1.0 + std::abs(p[i]));
      Vector pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      grad[i] = (f(pp) - f(pm)) / (2 * h);
    }
    double gn = grad.norm();
    if (gn <= 1e-14 * (1.0 + std::abs(fp))) break;
    double t = std::min(4.0 * step, (1.0 + p.norm()) / gn);
    bool accepted = false;
    for (int ls = 0; ls < 45; ++ls) {
      Vector cand = p - t * grad;
      double fc = f(cand);
      if (fc <= fp - 1e-4 * t * gn * gn) {
        p = cand;
        fp = fc;
        step = t;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    if (fp <= 1e-24) break;
  }
  return fp;
}

double gauss_newton_polish(const std::function<Vector(const Vector&)>& rfun, Vector& p,
                           int max_iters) {
  Vector r = rfun(p);
  double best = r.norm();
  for (int it = 0; it < max_iters; ++it) {
    const Index d = p.size();
    Matrix jac(r.size(), d);
    for (Index i = 0; i < d; ++i) {
      double h = 1e-7 * (1.0 + std::abs(p[i]));
      Vector pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      jac.col(i) = (rfun(pp) - rfun(pm)) / (2 * h);
    }
    Vector delta = linalg::least_squares(jac, -r);
    bool improved = false;
    double t = 1.0;
    for (int ls = 0; ls < 30; ++ls) {
      Vector cand = p + t * delta;
      Vector rc = rfun(cand);
      if (rc.norm() < best) {
        p = cand;
        r = rc;
        best = rc.norm();
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved || best <= 1e-14) break;
  }
  return best;
}

StabilityVerdict multistart_decide(const HomogeneousSystem& sys, const EngineConfig& cfg) {
  const Index n = sys.n, m = sys.m;
  // least-squares response of v to xi in the linear part, so that the free
  // block w only explores what the stationarity rows cannot absorb
  Matrix v0 = Matrix::Zero(m, n);
  if (sys.mode == SystemMode::Noncritical) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sys.jac.transpose());
    v0 = cod.solve(-sys.hess);
  }

  auto assemble = [&](const Vector& p) -> Vector {
    switch (sys.mode) {
      case SystemMode::Noncritical: {
        Vector xi = p.head(n);
        double nn = xi.norm();
        if (nn > 1e-14) xi /= nn;
        Vector u(n + m);
        u.head(n) = xi;
        u.tail(m) = v0 * xi + p.tail(m);
        return u;
      }
      default: {
        double nn = p.norm();
        return nn > 1e-14 ? Vector(p / nn) : p;
      }
    }
  };
  const Index pack_dim = sys.mode == SystemMode::Noncritical ? n + m : sys.unknown_dim();

  auto phi = [&](const Vector& p) { return sys.residual(assemble(p)).squaredNorm(); };
  auto res = [&](const Vector& p) { return sys.residual(assemble(p)); };

  struct RunResult {
    double residual = std::numeric_limits<double>::infinity();
    Vector u;
  };
  std::vector<RunResult> results(static_cast<size_t>(cfg.starts));
  const std::uint64_t mode_salt = 0x9d2c5680ULL + static_cast<std::uint64_t>(sys.mode);

  parallel_for(cfg.starts, [&](std::int64_t s) {
    Rng rng(Rng::derive(cfg.seed ^ mode_salt, static_cast<std::uint64_t>(s)));
    Vector p(pack_dim);
    if (sys.mode == SystemMode::Noncritical) {
      double radius = cfg.v_radii[static_cast<size_t>(s) % cfg.v_radii.size()];
      p.head(n) = rng.sphere(n);
      p.tail(m) = rng.ball(m, radius);
    } else {
      p = rng.sphere(pack_dim);
    }
    double fp = numeric_descent(phi, p, cfg.descent_iters);
    if (std::sqrt(fp) <= 1e-3) {
      gauss_newton_polish(res, p, 30);
    }
    Vector u = assemble(p);
    double cn = sys.constrained_norm(u);
    RunResult rr;
    if (cn > 1e-10) {
      u /= cn;
      rr.u = u;
      rr.residual = sys.residual(u).norm();
    }
    results[static_cast<size_t>(s)] = std::move(rr);
  }, cfg.exec);

  size_t best = 0;
  for (size_t i = 1; i < results.size(); ++i) {
    if (results[i].residual < results[best].residual) best = i;
  }

  StabilityVerdict verdict;
  verdict.mode = sys.mode;
  verdict.method = "multistart";
  verdict.seed = cfg.seed;
  verdict.residual = results[best].residual;
  if (results[best].residual <= cfg.tol_fail) {
    verdict.status = VerdictStatus::Fails;
    verdict.witness = results[best].u;
    verdict.detail = "certificate from start " + std::to_string(best);
  } else if (results[best].residual >= 10.0 * cfg.tol_crit) {
    verdict.status = VerdictStatus::Holds;
    verdict.detail = "no start reached residual " + std::to_string(10.0 * cfg.tol_crit) +
                     " (confidence, not proof)";
  } else {
    verdict.status = VerdictStatus::Inconclusive;
    verdict.detail = "best residual " + std::to_string(results[best].residual) +
                     " between certificate and confidence thresholds";
  }
  return verdict;
}

}  // namespace

StabilityVerdict decide_system(const HomogeneousSystem& sys, const EngineConfig& cfg) {
  DecisionMethod method = cfg.method;
  if (method == DecisionMethod::Auto) {
    method = sys.face.cone.polyhedral() ? DecisionMethod::FaceEnum
                                        : DecisionMethod::Multistart;
  }
  StabilityVerdict v = method == DecisionMethod::FaceEnum ? face_enum_decide(sys, cfg)
                                                          : multistart_decide(sys, cfg);
  if (v.status == VerdictStatus::Fails) {
    double check = verify_witness(sys, v.witness);
    if (check > cfg.tol_fail) {
      throw InconsistencyError("decide_system",
                               "witness failed independent re-verification: residual " +
                                   std::to_string(check));
    }
    v.residual = check;
  }
  return v;
}

StabilityVerdict noncriticality_test(const ConicProgram& prog, const KKTPoint& pt,
                                     const EngineConfig& cfg) {
  return decide_system(make_system(prog, pt, SystemMode::Noncritical), cfg);
}

StabilityVerdict x_isolated_calmness_test(const ConicProgram& prog, const KKTPoint& pt,
                                          const EngineConfig& cfg) {
  return decide_system(make_system(prog, pt, SystemMode::XIsolated), cfg);
}

SkktVerdict skkt_isolated_calmness_test(const ConicProgram& prog, const KKTPoint& pt,
                                        const EngineConfig& cfg) {
  SkktVerdict out;
  out.direct = decide_system(make_system(prog, pt, SystemMode::SkktIsolated), cfg);
  out.m_isolated = m_isolated_calmness_test(prog, pt, cfg);
  out.noncritical = noncriticality_test(prog, pt, cfg);

  bool direct_definite = out.direct.status != VerdictStatus::Inconclusive;
  bool conj_definite = out.m_isolated.status != VerdictStatus::Inconclusive &&
                       out.noncritical.status != VerdictStatus::Inconclusive;
  out.routes_comparable = direct_definite && conj_definite;
  if (out.routes_comparable) {
    bool direct_holds = out.direct.status == VerdictStatus::Holds;
    bool conj_holds = out.m_isolated.status == VerdictStatus::Holds &&
                      out.noncritical.status == VerdictStatus::Holds;
    out.routes_agree = direct_holds == conj_holds;
    if (!out.routes_agree) {
      throw InconsistencyError(
          "skkt_isolated_calmness_test",
          std::string("direct decision (") + to_string(out.direct.status) +
              ") contradicts m-isolated (" + to_string(out.m_isolated.status) +
              ") with noncritical (" + to_string(out.noncritical.status) + ")");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Second-order sufficient condition
// ---------------------------------------------------------------------------

SoscResult sosc_test(const ConicProgram& prog, const KKTPoint& pt,
                     const EngineConfig& cfg, double margin) {
  const Index n = prog.n;
  Matrix hess = lagrangian_hessian(prog, pt.x, pt.lambda);
  Matrix jac = prog.eval->jac_g(pt.x);
  const FaceDescriptor& face = pt.face;

  auto q0 = [&](const Vector& d) {
    Vector h = jac * d;
    return d.dot(hess * d) + sigma_form(face, h);
  };
  auto feas = [&](const Vector& d) {
    Vector h = jac * d;
    return (h - project_onto_critical_cone(face, h)).norm();
  };
  auto normalize = [](const Vector& v) {
    double nn = v.norm();
    return nn > 1e-14 ? Vector(v / nn) : v;
  };

  struct RunResult {
    double value = std::numeric_limits<double>::infinity();
    double feas = std::numeric_limits<double>::infinity();
    Vector d;
  };
  std::vector<RunResult> results(static_cast<size_t>(cfg.starts));
  const std::vector<double> rho_sweep = {1e2, 1e4, 1e6};

  parallel_for(cfg.starts, [&](std::int64_t s) {
    Rng rng(Rng::derive(cfg.seed ^ 0x50C50C50ULL, static_cast<std::uint64_t>(s)));
    Vector p = rng.sphere(n);
    for (double rho : rho_sweep) {
      auto obj = [&](const Vector& pp) {
        Vector d = normalize(pp);
        double fs = feas(d);
        return q0(d) + rho * fs * fs;
      };
      numeric_descent(obj, p, cfg.descent_iters / 2);
      p = normalize(p);
    }
    // pull g'd back into the critical cone; the cone is scale-invariant so
    // renormalizing keeps membership
    Vector d = normalize(p);
    for (int rep = 0; rep < 25; ++rep) {
      double fs = feas(d);
      if (fs <= 1e-12 * (1.0 + d.norm())) break;
      Vector h = jac * d;
      Vector target = project_onto_critical_cone(face, h);
      Vector cand = d + linalg::least_squares(jac, target - h);
      if (cand.norm() < 1e-6) break;  // direction collapsed: preimage trivial
      cand = normalize(cand);
      if (feas(cand) >= fs) break;
      d = cand;
    }
    RunResult rr;
    rr.d = d;
    rr.value = q0(d);
    rr.feas = feas(d);
    results[static_cast<size_t>(s)] = std::move(rr);
  }, cfg.exec);

  SoscResult out;
  out.seed = cfg.seed;
  const double feas_tol = 1e-8;
  double best_feasible_value = std::numeric_limits<double>::infinity();
  double min_feas = std::numeric_limits<double>::infinity();
  Vector best_d;
  for (const RunResult& rr : results) {
    min_feas = std::min(min_feas, rr.feas);
    if (rr.feas <= feas_tol && rr.value < best_feasible_value) {
      best_feasible_value = rr.value;
      best_d = rr.d;
    }
  }

  if (std::isfinite(best_feasible_value)) {
    out.min_value = best_feasible_value;
    out.witness = best_d;
    out.feasibility = feas(best_d);
    if (best_feasible_value <= -margin) {
      out.status = VerdictStatus::Fails;
      out.detail = "critical direction with negative curvature";
    } else if (best_feasible_value >= margin) {
      out.status = VerdictStatus::Holds;
      out.detail = "positive curvature over the sampled critical directions";
    } else {
      out.status = VerdictStatus::Inconclusive;
      out.detail = "minimum inside the margin band around zero";
    }
  } else if (min_feas > 1e-3) {
    out.status = VerdictStatus::Holds;
    out.vacuous = true;
    out.min_value = std::numeric_limits<double>::infinity();
    out.feasibility = min_feas;
    out.detail = "critical cone preimage appears trivial (min distance " +
                 std::to_string(min_feas) + ")";
  } else {
    out.status = VerdictStatus::Inconclusive;
    out.feasibility = min_feas;
    out.detail = "no start reached feasibility " + std::to_string(feas_tol);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sigma/Gamma sign-condition probe
// ---------------------------------------------------------------------------

SignProbeResult sigma_gamma_sign_probe(const ConicProgram& prog, const KKTPoint& pt,
                                       const EngineConfig& cfg, bool tilde) {
  const Index n = prog.n;
  const Index m = prog.m();
  Matrix hess = lagrangian_hessian(prog, pt.x, pt.lambda);
  Matrix jac = prog.eval->jac_g(pt.x);
  Matrix adj = jac.transpose();
  const FaceDescriptor& face = pt.face;
  Matrix ker = linalg::kernel_basis(adj);  // in multiplier space

  SignProbeResult out;
  out.tilde = tilde;
  out.seed = cfg.seed;
  out.min_product = std::numeric_limits<double>::infinity();

  struct Slot {
    bool valid = false;
    double product = 0;
    Vector xi, zeta;
  };
  std::vector<Slot> slots(static_cast<size_t>(cfg.probe_samples));

  parallel_for(cfg.probe_samples, [&](std::int64_t i) {
    Rng rng(Rng::derive(cfg.seed ^ (tilde ? 0x7A7A7A7AULL : 0x5A5A5A5AULL),
                        static_cast<std::uint64_t>(i)));
    Vector xi = rng.sphere(n);
    // repair xi into the critical-cone preimage
    for (int rep = 0; rep < 25; ++rep) {
      Vector h = jac * xi;
      Vector target = project_onto_critical_cone(face, h);
      if ((h - target).norm() <= 1e-11 * (1.0 + h.norm())) break;
      xi += linalg::least_squares(jac, target - h);
    }
    double nn = xi.norm();
    if (nn < 1e-8) return;
    xi /= nn;
    Vector h = jac * xi;
    if ((h - project_onto_critical_cone(face, h)).norm() > 1e-9 * (1.0 + h.norm())) return;

    // the Sigma equation pins adj*zeta; its solution set is zeta0 + ker(adj)
    Vector rhs = -hess * xi - 0.5 * adj * sigma_form_gradient(face, h);
    Vector zeta0 = linalg::least_squares(adj, rhs);
    if ((adj * zeta0 - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) return;

    // <h, zeta> is invariant along ker(adj) because h lies in range(jac)
    double product = h.dot(zeta0);

    Vector zeta_witness;
    bool feasible = false;
    if (!tilde) {
      // Dykstra between the affine solution set and the critical polar
      Vector x = zeta0, pinc = Vector::Zero(m), qinc = Vector::Zero(m);
      for (int it = 0; it < 600; ++it) {
        Vector w1 = x + pinc;
        Vector ya = ker.cols() > 0
                        ? Vector(zeta0 + ker * (ker.transpose() * (w1 - zeta0)))
                        : zeta0;
        pinc = w1 - ya;
        Vector w2 = ya + qinc;
        Vector xn = project_onto_critical_polar(face, w2);
        qinc = w2 - xn;
        double gap = (xn - x).norm();
        x = xn;
        if (gap <= 1e-12 * (1.0 + x.norm())) break;
      }
      double aff_gap = (adj * x - rhs).norm();
      double pol_gap = critical_polar_violation(face, x);
      if (aff_gap <= 1e-8 * (1.0 + rhs.norm()) && pol_gap <= 1e-8) {
        feasible = true;
        zeta_witness = x;
      }
    } else {
      // Gamma-tilde constrains zeta modulo ker(adj): feasibility means
      // dist(zeta0, polar + ker) = 0, by alternating minimization
      Vector p = Vector::Zero(m), kv = Vector::Zero(m);
      for (int it = 0; it < 600; ++it) {
        p = project_onto_critical_polar(face, zeta0 - kv);
        Vector kn = ker.cols() > 0 ? Vector(ker * (ker.transpose() * (zeta0 - p)))
                                   : Vector(Vector::Zero(m));
        double gap = (kn - kv).norm();
        kv = kn;
        if (gap <= 1e-13 * (1.0 + zeta0.norm())) break;
      }
      if ((zeta0 - p - kv).norm() <= 1e-8 * (1.0 + zeta0.norm())) {
        feasible = true;
        zeta_witness = zeta0;
      }
    }
    if (!feasible) return;

    Slot& slot = slots[static_cast<size_t>(i)];
    slot.valid = true;
    slot.product = product;
    slot.xi = xi;
    slot.zeta = zeta_witness;
  }, cfg.exec);

  for (const Slot& slot : slots) {
    if (!slot.valid) {
      ++out.samples_skipped;
      continue;
    }
    ++out.pairs_tested;
    if (slot.product < out.min_product) {
      out.min_product = slot.product;
      out.witness_xi = slot.xi;
      out.witness_zeta = slot.zeta;
    }
  }
  if (out.pairs_tested == 0) out.min_product = 0;
  out.falsified = out.min_product < -1e-8;
  return out;
}

// ---------------------------------------------------------------------------
// Sufficient-condition ladder
// ---------------------------------------------------------------------------

LadderReport strong_calmness_sufficient(const ConicProgram& prog, const KKTPoint& pt,
                                        const EngineConfig& engine_cfg,
                                        const ProbeConfig& probe_cfg, double ri_margin) {
  LadderReport rep;

  StabilityVerdict nc = noncriticality_test(prog, pt, engine_cfg);
  rep.links.push_back({"noncritical", nc.status == VerdictStatus::Holds,
                       nc.method == "multistart",
                       std::string(to_string(nc.status)) + " (" + nc.method + ")"});

  RatioStats sr = subregularity_probe(prog, pt.x, probe_cfg);
  rep.links.push_back(
      {"subregularity", !sr.diverging, true,
       (sr.diverging ? "probe diverges: " : "probe bounded: growth ") +
           std::to_string(sr.growth_per_decade) + "x per decade"});

  MultiplierSetRef ref = make_multiplier_ref(prog, pt);
  auto ri = find_ri_multiplier(ref, ri_margin);
  rep.links.push_back({"ri-multiplier", ri.has_value(), true,
                       ri ? "found with facial margin >= " + std::to_string(ri_margin)
                          : "none found within the search budget (absence is inconclusive)"});

  SignProbeResult sp = sigma_gamma_sign_probe(prog, pt, engine_cfg, /*tilde=*/true);
  rep.links.push_back({"sigma-gamma-sign", !sp.falsified, true,
                       sp.falsified
                           ? "falsified: min product " + std::to_string(sp.min_product)
                           : "not falsified after " + std::to_string(sp.pairs_tested) +
                                 " feasible pairs"});

  rep.sufficient = true;
  for (const LadderLink& link : rep.links) {
    if (!link.ok) {
      rep.sufficient = false;
      rep.broken_at = link.name;
      break;
    }
  }
  return rep;
}

}  // namespace calmkit
