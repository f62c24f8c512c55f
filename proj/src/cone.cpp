// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/cone.hpp"

#include <cmath>

#include "calmkit/linalg.hpp"

namespace calmkit {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double block_scale(const Vector& v) { return 1.0 + v.lpNorm<Eigen::Infinity>(); }

Vector clamp_psd_part(const Matrix& m, bool positive) {
  linalg::EigResult e = linalg::jacobi_eigh(m);
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Index i = 0; i < e.values.size(); ++i) {
    double v = positive ? std::max(e.values[i], 0.0) : std::min(e.values[i], 0.0);
    if (v != 0.0) out += v * e.vectors.col(i) * e.vectors.col(i).transpose();
  }
  return svec(out);
}

Vector soc_project(const Vector& z) {
  const Index m = z.size();
  if (m == 1) return Vector::Constant(1, std::max(z[0], 0.0));
  double a = z.tail(m - 1).norm();
  double s = z[0];
  if (a <= s) return z;
  Vector out = Vector::Zero(m);
  if (a <= -s) return out;
  double c = 0.5 * (s + a);
  out[0] = c;
  out.tail(m - 1) = (c / a) * z.tail(m - 1);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// svec / smat
// ---------------------------------------------------------------------------

Index svec_dim(Index order) { return order * (order + 1) / 2; }

Index svec_order(Index dim) {
  Index n = static_cast<Index>(std::floor((std::sqrt(8.0 * static_cast<double>(dim) + 1.0) - 1.0) / 2.0));
  for (Index k = std::max<Index>(n - 1, 0); k <= n + 1; ++k) {
    if (svec_dim(k) == dim) return k;
  }
  throw Error("svec_order", "length " + std::to_string(dim) +
                                " is not a triangular number n(n+1)/2");
}

Vector svec(const Matrix& m) {
  const Index n = m.rows();
  if (m.cols() != n) throw Error("svec", "matrix not square");
  Vector v(svec_dim(n));
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    v[k++] = m(j, j);
    for (Index i = j + 1; i < n; ++i) v[k++] = kSqrt2 * 0.5 * (m(i, j) + m(j, i));
  }
  return v;
}

Matrix smat(const Vector& v) {
  const Index n = svec_order(v.size());
  Matrix m(n, n);
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    m(j, j) = v[k++];
    for (Index i = j + 1; i < n; ++i) {
      m(i, j) = v[k] / kSqrt2;
      m(j, i) = m(i, j);
      ++k;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// ConeBlock / ProductCone
// ---------------------------------------------------------------------------

const char* cone_kind_name(ConeKind k) {
  switch (k) {
    case ConeKind::Zero: return "zero";
    case ConeKind::OrthantNonpos: return "orthant_nonpos";
    case ConeKind::OrthantNonneg: return "orthant_nonneg";
    case ConeKind::SecondOrder: return "soc";
    case ConeKind::Psd: return "psd";
  }
  return "?";
}

ConeBlock ConeBlock::zero(Index m) { return {ConeKind::Zero, m, m}; }
ConeBlock ConeBlock::orthant_nonpos(Index m) { return {ConeKind::OrthantNonpos, m, m}; }
ConeBlock ConeBlock::orthant_nonneg(Index m) { return {ConeKind::OrthantNonneg, m, m}; }
ConeBlock ConeBlock::second_order(Index m) { return {ConeKind::SecondOrder, m, m}; }
ConeBlock ConeBlock::psd(Index matrix_order) {
  return {ConeKind::Psd, svec_dim(matrix_order), matrix_order};
}

ProductCone::ProductCone(std::vector<ConeBlock> blocks) : blocks_(std::move(blocks)) {
  offsets_.reserve(blocks_.size());
  for (const ConeBlock& b : blocks_) {
    if (b.dim < 1) throw Error("ProductCone", "block with dim < 1");
    if (b.kind == ConeKind::Psd && b.order < 1)
      throw Error("ProductCone", "psd block with order < 1");
    offsets_.push_back(total_dim_);
    total_dim_ += b.dim;
  }
}

bool ProductCone::polyhedral() const {
  for (const ConeBlock& b : blocks_) {
    if (b.kind == ConeKind::SecondOrder || b.kind == ConeKind::Psd) return false;
  }
  return true;
}

void ProductCone::check_dim(const Vector& z, const char* op) const {
  if (z.size() != total_dim_) {
    throw Error(op, "dimension mismatch: got " + std::to_string(z.size()) +
                        ", cone has " + std::to_string(total_dim_));
  }
}

Vector ProductCone::project(const Vector& z) const {
  check_dim(z, "project");
  Vector out(total_dim_);
  for (Index b = 0; b < num_blocks(); ++b) {
    const ConeBlock& blk = block(b);
    auto seg = z.segment(offset(b), blk.dim);
    switch (blk.kind) {
      case ConeKind::Zero:
        out.segment(offset(b), blk.dim).setZero();
        break;
      case ConeKind::OrthantNonpos:
        out.segment(offset(b), blk.dim) = seg.cwiseMin(0.0);
        break;
      case ConeKind::OrthantNonneg:
        out.segment(offset(b), blk.dim) = seg.cwiseMax(0.0);
        break;
      case ConeKind::SecondOrder:
        out.segment(offset(b), blk.dim) = soc_project(seg);
        break;
      case ConeKind::Psd:
        try {
          out.segment(offset(b), blk.dim) = clamp_psd_part(smat(seg), true);
        } catch (const Error& e) {
          throw Error("project", "eigensolver failed on block " +
                                     std::to_string(b) + ": " + e.what());
        }
        break;
    }
  }
  return out;
}

Vector ProductCone::project_polar(const Vector& z) const {
  check_dim(z, "project_polar");
  Vector out(total_dim_);
  for (Index b = 0; b < num_blocks(); ++b) {
    const ConeBlock& blk = block(b);
    auto seg = z.segment(offset(b), blk.dim);
    switch (blk.kind) {
      case ConeKind::Zero:
        out.segment(offset(b), blk.dim) = seg;  // {0}^polar is everything
        break;
      case ConeKind::OrthantNonpos:
        out.segment(offset(b), blk.dim) = seg.cwiseMax(0.0);
        break;
      case ConeKind::OrthantNonneg:
        out.segment(offset(b), blk.dim) = seg.cwiseMin(0.0);
        break;
      case ConeKind::SecondOrder:
        out.segment(offset(b), blk.dim) = -soc_project(-seg);
        break;
      case ConeKind::Psd:
        out.segment(offset(b), blk.dim) = clamp_psd_part(smat(seg), false);
        break;
    }
  }
  const Vector moreau = z - project(z);
  double gap = (out - moreau).norm();
  if (gap > 1e-10 * (1.0 + z.norm())) {
    throw InconsistencyError(
        "project_polar", "direct polar projection and Moreau complement "
                         "disagree by " + std::to_string(gap));
  }
  return out;
}

double ProductCone::feasibility_gap(const Vector& y) const {
  return (y - project(y)).norm();
}

bool ProductCone::normal_cone_contains(const Vector& y, const Vector& lambda,
                                       double tol) const {
  check_dim(y, "normal_cone_contains");
  check_dim(lambda, "normal_cone_contains");
  double gap = feasibility_gap(y);
  if (gap > tol * (1.0 + y.norm())) {
    throw Error("normal_cone_contains", "y infeasible: dist(y, K) = " +
                                            std::to_string(gap));
  }
  double r = (y - project(y + lambda)).norm();
  return r <= tol * (1.0 + y.norm() + lambda.norm());
}

// ---------------------------------------------------------------------------
// Facial classification
// ---------------------------------------------------------------------------

namespace {

void classify_orthant(const ConeBlock& blk, Index block_idx, bool nonpos,
                      const Vector& y, const Vector& lam, double tol_rank,
                      BlockFace* face, std::vector<std::string>* notes) {
  const double s = 1.0 + std::max(y.lpNorm<Eigen::Infinity>(), lam.lpNorm<Eigen::Infinity>());
  const double zero_tol = tol_rank * s;
  const double sign = nonpos ? 1.0 : -1.0;
  for (Index i = 0; i < blk.dim; ++i) {
    const double yi = sign * y[i];    // feasible means yi <= 0 after flip
    const double li = sign * lam[i];  // normal means li >= 0 on active coords
    if (yi > zero_tol) {
      throw Error("face_descriptor", "orthant coordinate infeasible in block " +
                                         std::to_string(block_idx));
    }
    if (std::abs(yi) <= zero_tol) {
      if (li < -zero_tol) {
        throw Error("face_descriptor",
                    "multiplier outside the normal cone on an active orthant "
                    "coordinate in block " + std::to_string(block_idx));
      }
      if (li > zero_tol) {
        face->orthant.strict.push_back(i);
      } else {
        face->orthant.weak.push_back(i);
      }
      if (std::abs(li) > zero_tol && std::abs(li) <= 1000.0 * zero_tol) {
        notes->push_back("block " + std::to_string(block_idx) + " coord " +
                         std::to_string(i) + ": multiplier near the activity threshold");
      }
    } else {
      if (std::abs(li) > zero_tol * 10.0) {
        throw Error("face_descriptor",
                    "complementarity violated on an inactive orthant coordinate "
                    "in block " + std::to_string(block_idx));
      }
      face->orthant.inactive.push_back(i);
    }
    if (std::abs(yi) > zero_tol && std::abs(yi) <= 1000.0 * zero_tol) {
      notes->push_back("block " + std::to_string(block_idx) + " coord " +
                       std::to_string(i) + ": value near the activity threshold");
    }
  }
}

void classify_soc(const ConeBlock& blk, Index block_idx, const Vector& y,
                  const Vector& lam, double tol_rank, BlockFace* face,
                  std::vector<std::string>* notes) {
  const Index m = blk.dim;
  const double s = 1.0 + std::max(y.norm(), lam.norm());
  const double zero_tol = tol_rank * s;
  SocFace& f = face->soc;

  const double ny = y.norm();
  const double nl = lam.norm();
  const double ytail = m > 1 ? y.tail(m - 1).norm() : 0.0;

  if (ny <= zero_tol) {
    // apex
    if (nl <= zero_tol) {
      f.tag = SocCase::ApexZero;
      return;
    }
    double ltail = m > 1 ? lam.tail(m - 1).norm() : 0.0;
    double margin = -lam[0] - ltail;  // > 0 strictly inside the polar
    if (margin < -10.0 * zero_tol) {
      throw Error("face_descriptor", "multiplier outside the polar cone at the "
                                     "apex of soc block " + std::to_string(block_idx));
    }
    if (margin > zero_tol) {
      f.tag = SocCase::ApexPolarInterior;
      return;
    }
    if (margin <= zero_tol && margin > -10.0 * zero_tol && std::abs(margin) <= 1000.0 * zero_tol) {
      notes->push_back("block " + std::to_string(block_idx) +
                       ": multiplier near the polar boundary");
    }
    if (ltail <= zero_tol) {
      // lambda = (l0, ~0) on the polar boundary forces l0 ~ 0, i.e. lambda ~ 0
      f.tag = SocCase::ApexZero;
      return;
    }
    f.tag = SocCase::ApexPolarBoundary;
    f.dir = lam.tail(m - 1) / ltail;
    f.mult_scale = ltail;
    return;
  }

  if (y[0] - ytail > zero_tol) {
    if (nl > 10.0 * zero_tol) {
      throw Error("face_descriptor", "nonzero multiplier at an interior point "
                                     "of soc block " + std::to_string(block_idx));
    }
    f.tag = SocCase::Interior;
    return;
  }

  // boundary, nonzero
  if (m == 1 || ytail <= zero_tol) {
    throw Error("face_descriptor", "degenerate boundary point in soc block " +
                                       std::to_string(block_idx));
  }
  if (std::abs(y[0] - ytail) <= 1000.0 * zero_tol && std::abs(y[0] - ytail) > zero_tol) {
    notes->push_back("block " + std::to_string(block_idx) + ": y near the cone boundary");
  }
  f.dir = y.tail(m - 1) / ytail;
  f.y_head = y[0];
  double t = -lam[0];
  Vector expect(m);
  expect[0] = -t;
  expect.tail(m - 1) = t * f.dir;
  if (t < -zero_tol || (lam - expect).norm() > 10.0 * zero_tol) {
    throw Error("face_descriptor", "multiplier not on the normal ray of soc block " +
                                       std::to_string(block_idx));
  }
  if (t <= zero_tol) {
    f.tag = SocCase::BoundaryZero;
    f.mult_scale = 0.0;
  } else {
    f.tag = SocCase::BoundaryActive;
    f.mult_scale = t;
  }
}

void classify_psd(const ConeBlock& blk, Index block_idx, const Vector& y,
                  const Vector& lam, double tol_rank, BlockFace* face,
                  std::vector<std::string>* notes) {
  Matrix ym = smat(y);
  Matrix lm = smat(lam);
  Matrix z = ym + lm;
  linalg::EigResult e = linalg::jacobi_eigh(z);
  const double s = 1.0 + e.values.cwiseAbs().maxCoeff();
  const double zero_tol = tol_rank * s;

  PsdFace& f = face->psd;
  f.basis = e.vectors;
  f.eig = e.values;
  for (Index i = 0; i < blk.order; ++i) {
    double v = e.values[i];
    if (v > zero_tol) {
      f.alpha.push_back(i);
    } else if (v < -zero_tol) {
      f.gamma.push_back(i);
    } else {
      f.beta.push_back(i);
    }
    if (std::abs(v) > zero_tol && std::abs(v) <= 1000.0 * zero_tol) {
      notes->push_back("block " + std::to_string(block_idx) + ": eigenvalue " +
                       std::to_string(v) + " near the rank threshold");
    }
  }

  // (y, lam) must be the positive/negative parts of z = y + lam: this is
  // exactly complementarity for the psd cone.
  Matrix ypos = Matrix::Zero(blk.order, blk.order);
  Matrix lneg = Matrix::Zero(blk.order, blk.order);
  for (Index i = 0; i < blk.order; ++i) {
    double v = e.values[i];
    if (v > 0) ypos += v * e.vectors.col(i) * e.vectors.col(i).transpose();
    if (v < 0) lneg += v * e.vectors.col(i) * e.vectors.col(i).transpose();
  }
  double vtol = std::max(1e-7, 100.0 * tol_rank) * s;
  if ((ym - ypos).norm() > vtol || (lm - lneg).norm() > vtol) {
    throw Error("face_descriptor", "complementarity violated in psd block " +
                                       std::to_string(block_idx));
  }
}

}  // namespace

FaceDescriptor face_descriptor(const ProductCone& k, const Vector& y,
                               const Vector& lam, double tol_rank) {
  if (y.size() != k.total_dim() || lam.size() != k.total_dim()) {
    throw Error("face_descriptor", "dimension mismatch");
  }
  FaceDescriptor fd;
  fd.cone = k;
  fd.faces.resize(static_cast<size_t>(k.num_blocks()));
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const ConeBlock& blk = k.block(b);
    BlockFace& face = fd.faces[static_cast<size_t>(b)];
    face.kind = blk.kind;
    face.dim = blk.dim;
    Vector yb = y.segment(k.offset(b), blk.dim);
    Vector lb = lam.segment(k.offset(b), blk.dim);
    switch (blk.kind) {
      case ConeKind::Zero: {
        double s = 1.0 + yb.norm();
        if (yb.norm() > tol_rank * s * 10.0) {
          throw Error("face_descriptor",
                      "zero-cone block " + std::to_string(b) + " has y != 0");
        }
        break;
      }
      case ConeKind::OrthantNonpos:
        classify_orthant(blk, b, true, yb, lb, tol_rank, &face, &fd.ambiguities);
        break;
      case ConeKind::OrthantNonneg:
        classify_orthant(blk, b, false, yb, lb, tol_rank, &face, &fd.ambiguities);
        break;
      case ConeKind::SecondOrder:
        classify_soc(blk, b, yb, lb, tol_rank, &face, &fd.ambiguities);
        break;
      case ConeKind::Psd:
        classify_psd(blk, b, yb, lb, tol_rank, &face, &fd.ambiguities);
        break;
    }
  }
  return fd;
}

// ---------------------------------------------------------------------------
// Critical cone membership and projections
// ---------------------------------------------------------------------------

namespace {

// Unit vectors spanning the soc boundary geometry. v = (1, -w)/sqrt(2) is the
// inward normal of the tangent halfspace at a boundary point with tail
// direction w; nu = -v generates N and the critical polar there.
Vector soc_tangent_normal(const SocFace& f, Index m) {
  Vector v(m);
  v[0] = 1.0;
  v.tail(m - 1) = -f.dir;
  return v / kSqrt2;
}

Vector soc_apex_ray(const SocFace& f, Index m) {
  // C_Q(0, lambda) for boundary lambda: the ray through (1, w)/sqrt(2)
  Vector u(m);
  u[0] = 1.0;
  u.tail(m - 1) = f.dir;
  return u / kSqrt2;
}

double psd_min_eig(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  return linalg::jacobi_eigh(m).values.minCoeff();
}

double psd_max_eig(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  return linalg::jacobi_eigh(m).values.maxCoeff();
}

Matrix submatrix(const Matrix& m, const std::vector<Index>& rows,
                 const std::vector<Index>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

double orthant_crit_violation(const BlockFace& face, bool nonpos, const Vector& h) {
  const double sign = nonpos ? 1.0 : -1.0;
  double v = 0.0;
  for (Index i : face.orthant.strict) v = std::max(v, std::abs(h[i]));
  for (Index i : face.orthant.weak) v = std::max(v, std::max(sign * h[i], 0.0));
  return v;
}

double orthant_polar_violation(const BlockFace& face, bool nonpos, const Vector& w) {
  const double sign = nonpos ? 1.0 : -1.0;
  double v = 0.0;
  for (Index i : face.orthant.inactive) v = std::max(v, std::abs(w[i]));
  for (Index i : face.orthant.weak) v = std::max(v, std::max(-sign * w[i], 0.0));
  return v;
}

}  // namespace

double critical_cone_violation(const FaceDescriptor& fd, const Vector& h) {
  const ProductCone& k = fd.cone;
  if (h.size() != k.total_dim()) throw Error("critical_cone_contains", "dimension mismatch");
  double worst = 0.0;
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = fd.faces[static_cast<size_t>(b)];
    Vector hb = h.segment(k.offset(b), face.dim);
    const double s = block_scale(hb);
    double v = 0.0;
    switch (face.kind) {
      case ConeKind::Zero:
        v = hb.lpNorm<Eigen::Infinity>();
        break;
      case ConeKind::OrthantNonpos:
        v = orthant_crit_violation(face, true, hb);
        break;
      case ConeKind::OrthantNonneg:
        v = orthant_crit_violation(face, false, hb);
        break;
      case ConeKind::SecondOrder: {
        const SocFace& f = face.soc;
        const Index m = face.dim;
        switch (f.tag) {
          case SocCase::Interior:
            v = 0.0;
            break;
          case SocCase::ApexPolarInterior:
            v = hb.norm();
            break;
          case SocCase::ApexZero:
            v = (m > 1) ? std::max(hb.tail(m - 1).norm() - hb[0], 0.0)
                        : std::max(-hb[0], 0.0);
            break;
          case SocCase::ApexPolarBoundary: {
            Vector u = soc_apex_ray(f, m);
            double t = u.dot(hb);
            v = std::max((hb - t * u).norm(), std::max(-t, 0.0));
            break;
          }
          case SocCase::BoundaryZero:
            v = std::max(-soc_tangent_normal(f, m).dot(hb), 0.0);
            break;
          case SocCase::BoundaryActive:
            v = std::abs(soc_tangent_normal(f, m).dot(hb));
            break;
        }
        break;
      }
      case ConeKind::Psd: {
        const PsdFace& f = face.psd;
        Matrix ht = f.basis.transpose() * smat(hb) * f.basis;
        double v1 = submatrix(ht, f.beta, f.gamma).size()
                        ? submatrix(ht, f.beta, f.gamma).cwiseAbs().maxCoeff() : 0.0;
        double v2 = submatrix(ht, f.gamma, f.gamma).size()
                        ? submatrix(ht, f.gamma, f.gamma).cwiseAbs().maxCoeff() : 0.0;
        double v3 = std::max(-psd_min_eig(submatrix(ht, f.beta, f.beta)), 0.0);
        v = std::max({v1, v2, v3});
        break;
      }
    }
    worst = std::max(worst, v / s);
  }
  return worst;
}

double critical_polar_violation(const FaceDescriptor& fd, const Vector& w) {
  const ProductCone& k = fd.cone;
  if (w.size() != k.total_dim()) throw Error("critical_polar_contains", "dimension mismatch");
  double worst = 0.0;
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = fd.faces[static_cast<size_t>(b)];
    Vector wb = w.segment(k.offset(b), face.dim);
    const double s = block_scale(wb);
    double v = 0.0;
    switch (face.kind) {
      case ConeKind::Zero:
        v = 0.0;  // C = {0}, polar is everything
        break;
      case ConeKind::OrthantNonpos:
        v = orthant_polar_violation(face, true, wb);
        break;
      case ConeKind::OrthantNonneg:
        v = orthant_polar_violation(face, false, wb);
        break;
      case ConeKind::SecondOrder: {
        const SocFace& f = face.soc;
        const Index m = face.dim;
        switch (f.tag) {
          case SocCase::Interior:
            v = wb.norm();
            break;
          case SocCase::ApexPolarInterior:
            v = 0.0;
            break;
          case SocCase::ApexZero:  // Q^polar
            v = (m > 1) ? std::max(wb.tail(m - 1).norm() + wb[0], 0.0)
                        : std::max(wb[0], 0.0);
            break;
          case SocCase::ApexPolarBoundary:
            v = std::max(soc_apex_ray(f, m).dot(wb), 0.0);
            break;
          case SocCase::BoundaryZero: {
            Vector nu = -soc_tangent_normal(f, m);
            double t = nu.dot(wb);
            v = std::max((wb - t * nu).norm(), std::max(-t, 0.0));
            break;
          }
          case SocCase::BoundaryActive: {
            Vector nu = -soc_tangent_normal(f, m);
            v = (wb - nu.dot(wb) * nu).norm();
            break;
          }
        }
        break;
      }
      case ConeKind::Psd: {
        const PsdFace& f = face.psd;
        Matrix wt = f.basis.transpose() * smat(wb) * f.basis;
        double v1 = submatrix(wt, f.alpha, f.alpha).size()
                        ? submatrix(wt, f.alpha, f.alpha).cwiseAbs().maxCoeff() : 0.0;
        double v2 = submatrix(wt, f.alpha, f.beta).size()
                        ? submatrix(wt, f.alpha, f.beta).cwiseAbs().maxCoeff() : 0.0;
        double v3 = submatrix(wt, f.alpha, f.gamma).size()
                        ? submatrix(wt, f.alpha, f.gamma).cwiseAbs().maxCoeff() : 0.0;
        double v4 = std::max(psd_max_eig(submatrix(wt, f.beta, f.beta)), 0.0);
        v = std::max({v1, v2, v3, v4});
        break;
      }
    }
    worst = std::max(worst, v / s);
  }
  return worst;
}

bool critical_cone_contains(const FaceDescriptor& fd, const Vector& h, double tol) {
  return critical_cone_violation(fd, h) <= tol;
}

bool critical_polar_contains(const FaceDescriptor& fd, const Vector& w, double tol) {
  return critical_polar_violation(fd, w) <= tol;
}

Vector project_onto_critical_cone(const FaceDescriptor& fd, const Vector& h) {
  const ProductCone& k = fd.cone;
  if (h.size() != k.total_dim()) throw Error("project_onto_critical_cone", "dimension mismatch");
  Vector out(h.size());
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = fd.faces[static_cast<size_t>(b)];
    Vector hb = h.segment(k.offset(b), face.dim);
    Vector ob = hb;
    switch (face.kind) {
      case ConeKind::Zero:
        ob.setZero();
        break;
      case ConeKind::OrthantNonpos:
        for (Index i : face.orthant.strict) ob[i] = 0.0;
        for (Index i : face.orthant.weak) ob[i] = std::min(hb[i], 0.0);
        break;
      case ConeKind::OrthantNonneg:
        for (Index i : face.orthant.strict) ob[i] = 0.0;
        for (Index i : face.orthant.weak) ob[i] = std::max(hb[i], 0.0);
        break;
      case ConeKind::SecondOrder: {
        const SocFace& f = face.soc;
        const Index m = face.dim;
        switch (f.tag) {
          case SocCase::Interior:
            break;
          case SocCase::ApexPolarInterior:
            ob.setZero();
            break;
          case SocCase::ApexZero:
            ob = soc_project(hb);
            break;
          case SocCase::ApexPolarBoundary: {
            Vector u = soc_apex_ray(f, m);
            ob = std::max(u.dot(hb), 0.0) * u;
            break;
          }
          case SocCase::BoundaryZero: {
            Vector v = soc_tangent_normal(f, m);
            ob = hb - std::min(v.dot(hb), 0.0) * v;
            break;
          }
          case SocCase::BoundaryActive: {
            Vector v = soc_tangent_normal(f, m);
            ob = hb - v.dot(hb) * v;
            break;
          }
        }
        break;
      }
      case ConeKind::Psd: {
        const PsdFace& f = face.psd;
        Matrix ht = f.basis.transpose() * smat(hb) * f.basis;
        for (Index bi : f.beta) {
          for (Index gj : f.gamma) {
            ht(bi, gj) = 0.0;
            ht(gj, bi) = 0.0;
          }
        }
        for (Index gi : f.gamma)
          for (Index gj : f.gamma) ht(gi, gj) = 0.0;
        if (!f.beta.empty()) {
          Matrix bb = submatrix(ht, f.beta, f.beta);
          linalg::EigResult e = linalg::jacobi_eigh(bb);
          Matrix clamped = Matrix::Zero(bb.rows(), bb.cols());
          for (Index i = 0; i < e.values.size(); ++i) {
            double v = std::max(e.values[i], 0.0);
            if (v != 0.0) clamped += v * e.vectors.col(i) * e.vectors.col(i).transpose();
          }
          for (size_t i = 0; i < f.beta.size(); ++i)
            for (size_t j = 0; j < f.beta.size(); ++j)
              ht(f.beta[i], f.beta[j]) = clamped(static_cast<Index>(i), static_cast<Index>(j));
        }
        ob = svec(f.basis * ht * f.basis.transpose());
        break;
      }
    }
    out.segment(k.offset(b), face.dim) = ob;
  }
  return out;
}

Vector project_onto_critical_polar(const FaceDescriptor& fd, const Vector& w) {
  // Moreau per block: C is a cone blockwise
  return w - project_onto_critical_cone(fd, w);
}

Vector project_onto_normal_cone(const FaceDescriptor& fd, const Vector& w) {
  const ProductCone& k = fd.cone;
  if (w.size() != k.total_dim()) throw Error("project_onto_normal_cone", "dimension mismatch");
  Vector out(w.size());
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = fd.faces[static_cast<size_t>(b)];
    Vector wb = w.segment(k.offset(b), face.dim);
    Vector ob = Vector::Zero(face.dim);
    switch (face.kind) {
      case ConeKind::Zero:
        ob = wb;  // N_{{0}} is everything
        break;
      case ConeKind::OrthantNonpos:
        for (Index i : face.orthant.strict) ob[i] = std::max(wb[i], 0.0);
        for (Index i : face.orthant.weak) ob[i] = std::max(wb[i], 0.0);
        break;
      case ConeKind::OrthantNonneg:
        for (Index i : face.orthant.strict) ob[i] = std::min(wb[i], 0.0);
        for (Index i : face.orthant.weak) ob[i] = std::min(wb[i], 0.0);
        break;
      case ConeKind::SecondOrder: {
        const SocFace& f = face.soc;
        const Index m = face.dim;
        switch (f.tag) {
          case SocCase::Interior:
            break;  // N = {0}
          case SocCase::ApexZero:
          case SocCase::ApexPolarInterior:
          case SocCase::ApexPolarBoundary:
            ob = -soc_project(-wb);  // N = Q^polar
            break;
          case SocCase::BoundaryZero:
          case SocCase::BoundaryActive: {
            Vector nu = -soc_tangent_normal(f, m);
            ob = std::max(nu.dot(wb), 0.0) * nu;
            break;
          }
        }
        break;
      }
      case ConeKind::Psd: {
        // N = {L : basis' L basis supported on the kernel of ybar, <= 0 there}
        const PsdFace& f = face.psd;
        std::vector<Index> kernel = f.beta;
        kernel.insert(kernel.end(), f.gamma.begin(), f.gamma.end());
        Matrix wt = f.basis.transpose() * smat(wb) * f.basis;
        Matrix nt = Matrix::Zero(wt.rows(), wt.cols());
        if (!kernel.empty()) {
          Matrix kk = submatrix(wt, kernel, kernel);
          linalg::EigResult e = linalg::jacobi_eigh(kk);
          Matrix clamped = Matrix::Zero(kk.rows(), kk.cols());
          for (Index i = 0; i < e.values.size(); ++i) {
            double v = std::min(e.values[i], 0.0);
            if (v != 0.0) clamped += v * e.vectors.col(i) * e.vectors.col(i).transpose();
          }
          for (size_t i = 0; i < kernel.size(); ++i)
            for (size_t j = 0; j < kernel.size(); ++j)
              nt(kernel[i], kernel[j]) = clamped(static_cast<Index>(i), static_cast<Index>(j));
        }
        ob = svec(f.basis * nt * f.basis.transpose());
        break;
      }
    }
    out.segment(k.offset(b), face.dim) = ob;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Directional derivative of the projection
// ---------------------------------------------------------------------------

Vector proj_dirderiv(const FaceDescriptor& fd, const Vector& h) {
  const ProductCone& k = fd.cone;
  if (h.size() != k.total_dim()) throw Error("proj_dirderiv", "dimension mismatch");
  Vector out(h.size());
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = fd.faces[static_cast<size_t>(b)];
    Vector hb = h.segment(k.offset(b), face.dim);
    Vector ob = hb;
    switch (face.kind) {
      case ConeKind::Zero:
        ob.setZero();
        break;
      case ConeKind::OrthantNonpos:
        for (Index i : face.orthant.strict) ob[i] = 0.0;
        for (Index i : face.orthant.weak) ob[i] = std::min(hb[i], 0.0);
        break;
      case ConeKind::OrthantNonneg:
        for (Index i : face.orthant.strict) ob[i] = 0.0;
        for (Index i : face.orthant.weak) ob[i] = std::max(hb[i], 0.0);
        break;
      case ConeKind::SecondOrder: {
        const SocFace& f = face.soc;
        const Index m = face.dim;
        switch (f.tag) {
          case SocCase::Interior:
            break;  // identity
          case SocCase::ApexZero:
            ob = soc_project(hb);  // projection is positively homogeneous at 0
            break;
          case SocCase::ApexPolarInterior:
            ob.setZero();
            break;
          case SocCase::ApexPolarBoundary: {
            Vector u = soc_apex_ray(f, m);
            ob = std::max(u.dot(hb), 0.0) * u;
            break;
          }
          case SocCase::BoundaryZero: {
            Vector v = soc_tangent_normal(f, m);
            ob = hb - std::min(v.dot(hb), 0.0) * v;
            break;
          }
          case SocCase::BoundaryActive: {
            // smooth point of the projection: z = ybar + lambdabar lies
            // strictly between the cone and its polar
            const double t = f.mult_scale;
            const double z0 = f.y_head - t;
            const double a = f.y_head + t;  // |z tail|
            const Vector& w = f.dir;
            Vector ht = hb.tail(m - 1);
            double hw = w.dot(ht);
            ob[0] = 0.5 * hb[0] + 0.5 * hw;
            ob.tail(m - 1) =
                0.5 * hb[0] * w + (z0 / (2.0 * a)) * (ht - hw * w) + 0.5 * ht;
            break;
          }
        }
        break;
      }
      case ConeKind::Psd: {
        const PsdFace& f = face.psd;
        Matrix ht = f.basis.transpose() * smat(hb) * f.basis;
        Matrix rt = ht;
        for (Index gi : f.gamma) {
          for (Index gj : f.gamma) rt(gi, gj) = 0.0;
          for (Index bi : f.beta) {
            rt(bi, gi) = 0.0;
            rt(gi, bi) = 0.0;
          }
          for (Index ai : f.alpha) {
            double omega = f.eig[ai] / (f.eig[ai] - f.eig[gi]);
            rt(ai, gi) = omega * ht(ai, gi);
            rt(gi, ai) = rt(ai, gi);
          }
        }
        if (!f.beta.empty()) {
          Matrix bb = submatrix(ht, f.beta, f.beta);
          linalg::EigResult e = linalg::jacobi_eigh(bb);
          Matrix clamped = Matrix::Zero(bb.rows(), bb.cols());
          for (Index i = 0; i < e.values.size(); ++i) {
            double v = std::max(e.values[i], 0.0);
            if (v != 0.0) clamped += v * e.vectors.col(i) * e.vectors.col(i).transpose();
          }
          for (size_t i = 0; i < f.beta.size(); ++i)
            for (size_t j = 0; j < f.beta.size(); ++j)
              rt(f.beta[i], f.beta[j]) = clamped(static_cast<Index>(i), static_cast<Index>(j));
        }
        ob = svec(f.basis * rt * f.basis.transpose());
        break;
      }
    }
    out.segment(k.offset(b), face.dim) = ob;
  }
  return out;
}

Vector proj_dirderiv(const ProductCone& k, const Vector& z, const Vector& h) {
  Vector zbar = k.project(z);
  Vector mubar = z - zbar;
  FaceDescriptor fd = face_descriptor(k, zbar, mubar);
  return proj_dirderiv(fd, h);
}

// ---------------------------------------------------------------------------
// Sigma term
// ---------------------------------------------------------------------------

double sigma_form(const FaceDescriptor& fd, const Vector& h) {
  const ProductCone& k = fd.cone;
  if (h.size() != k.total_dim()) throw Error("sigma_form", "dimension mismatch");
  double total = 0.0;
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = fd.faces[static_cast<size_t>(b)];
    Vector hb = h.segment(k.offset(b), face.dim);
    switch (face.kind) {
      case ConeKind::Zero:
      case ConeKind::OrthantNonpos:
      case ConeKind::OrthantNonneg:
        break;  // polyhedral: zero curvature
      case ConeKind::SecondOrder: {
        const SocFace& f = face.soc;
        if (f.tag == SocCase::BoundaryActive) {
          const Index m = face.dim;
          Vector ht = hb.tail(m - 1);
          double hw = f.dir.dot(ht);
          total += (f.mult_scale / f.y_head) * (ht.squaredNorm() - hw * hw);
        }
        break;
      }
      case ConeKind::Psd: {
        const PsdFace& f = face.psd;
        if (!f.alpha.empty() && !f.gamma.empty()) {
          Matrix ht = f.basis.transpose() * smat(hb) * f.basis;
          double s = 0.0;
          for (Index ai : f.alpha)
            for (Index gi : f.gamma)
              s += (f.eig[gi] / f.eig[ai]) * ht(ai, gi) * ht(ai, gi);
          total += -2.0 * s;
        }
        break;
      }
    }
  }
  return total;
}

Vector sigma_form_gradient(const FaceDescriptor& fd, const Vector& h) {
  const ProductCone& k = fd.cone;
  if (h.size() != k.total_dim()) throw Error("sigma_form_gradient", "dimension mismatch");
  Vector out = Vector::Zero(h.size());
  for (Index b = 0; b < k.num_blocks(); ++b) {
    const BlockFace& face = fd.faces[static_cast<size_t>(b)];
    Vector hb = h.segment(k.offset(b), face.dim);
    switch (face.kind) {
      case ConeKind::Zero:
      case ConeKind::OrthantNonpos:
      case ConeKind::OrthantNonneg:
        break;
      case ConeKind::SecondOrder: {
        const SocFace& f = face.soc;
        if (f.tag == SocCase::BoundaryActive) {
          const Index m = face.dim;
          Vector ht = hb.tail(m - 1);
          double hw = f.dir.dot(ht);
          Vector gb = Vector::Zero(m);
          gb.tail(m - 1) = (2.0 * f.mult_scale / f.y_head) * (ht - hw * f.dir);
          out.segment(k.offset(b), m) = gb;
        }
        break;
      }
      case ConeKind::Psd: {
        const PsdFace& f = face.psd;
        if (!f.alpha.empty() && !f.gamma.empty()) {
          Matrix ht = f.basis.transpose() * smat(hb) * f.basis;
          Matrix gt = Matrix::Zero(ht.rows(), ht.cols());
          for (Index ai : f.alpha) {
            for (Index gi : f.gamma) {
              gt(ai, gi) = -2.0 * (f.eig[gi] / f.eig[ai]) * ht(ai, gi);
              gt(gi, ai) = gt(ai, gi);
            }
          }
          out.segment(k.offset(b), face.dim) = svec(f.basis * gt * f.basis.transpose());
        }
        break;
      }
    }
  }
  return out;
}

double sigma_term(const FaceDescriptor& fd, const Vector& h, double tol) {
  double viol = critical_cone_violation(fd, h);
  if (viol > tol) {
    throw Error("sigma_term", "direction outside the critical cone (violation " +
                                  std::to_string(viol) + ")");
  }
  return sigma_form(fd, h);
}

Vector sigma_gradient(const FaceDescriptor& fd, const Vector& h, double tol) {
  double viol = critical_cone_violation(fd, h);
  if (viol > tol) {
    throw Error("sigma_gradient", "direction outside the critical cone (violation " +
                                      std::to_string(viol) + ")");
  }
  return sigma_form_gradient(fd, h);
}

// ---------------------------------------------------------------------------
// Graphical derivative membership (both routes)
// ---------------------------------------------------------------------------

bool normal_graph_deriv_contains(const ProductCone& k, const Vector& zbar,
                                 const Vector& mubar, const Vector& dy,
                                 const Vector& dlambda, double tol) {
  FaceDescriptor fd = face_descriptor(k, zbar, mubar);
  const double scale = 1.0 + dy.norm() + dlambda.norm();

  // route 1: dy = Pi'_K(zbar + mubar; dy + dlambda)
  double r1 = (dy - proj_dirderiv(fd, dy + dlambda)).norm() / scale;

  // route 2: the critical-cone triple
  double c1 = critical_cone_violation(fd, dy);
  double c2 = critical_polar_violation(fd, dlambda - 0.5 * sigma_form_gradient(fd, dy));
  double c3 = std::abs(dy.dot(dlambda) - sigma_form(fd, dy)) /
              (1.0 + dy.squaredNorm() + dlambda.squaredNorm());
  double r2 = std::max({c1, c2, c3});

  bool ok1 = r1 <= tol;
  bool ok2 = r2 <= tol;
  if (ok1 != ok2) {
    // only a clear split is a formula bug; near the tolerance boundary the
    // two residuals may straddle tol without meaning anything
    bool clear_split = (ok1 && r2 > 10.0 * tol) || (ok2 && r1 > 10.0 * tol);
    if (clear_split) {
      throw InconsistencyError(
          "normal_graph_deriv_contains",
          "projection-derivative route and critical-cone route disagree "
          "(residuals " + std::to_string(r1) + " vs " + std::to_string(r2) + ")");
    }
  }
  return ok1;
}

}  // namespace calmkit
