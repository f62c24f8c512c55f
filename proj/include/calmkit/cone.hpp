// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <string>
#include <vector>

#include "calmkit/types.hpp"

namespace calmkit {

// ---------------------------------------------------------------------------
// Symmetric vectorization. PSD blocks live in svec coordinates: scaled
// column-major lower triangle, off-diagonal entries multiplied by sqrt(2),
// so that <svec(A), svec(B)> = trace(A B).
// ---------------------------------------------------------------------------

Index svec_dim(Index order);
Index svec_order(Index dim);  // throws unless dim = k(k+1)/2
Vector svec(const Matrix& m);
Matrix smat(const Vector& v);

// ---------------------------------------------------------------------------
// Cone blocks and the product cone
// ---------------------------------------------------------------------------

enum class ConeKind { Zero, OrthantNonpos, OrthantNonneg, SecondOrder, Psd };

const char* cone_kind_name(ConeKind k);

struct ConeBlock {
  ConeKind kind;
  Index dim;    // ambient coordinate count of the block
  Index order;  // matrix order for Psd; otherwise equal to dim

  static ConeBlock zero(Index m);
  static ConeBlock orthant_nonpos(Index m);
  static ConeBlock orthant_nonneg(Index m);
  static ConeBlock second_order(Index m);  // coordinate 0 is the cone head
  static ConeBlock psd(Index matrix_order);
};

class ProductCone {
 public:
  ProductCone() = default;
  explicit ProductCone(std::vector<ConeBlock> blocks);

  Index total_dim() const { return total_dim_; }
  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  const ConeBlock& block(Index b) const { return blocks_[static_cast<size_t>(b)]; }
  Index offset(Index b) const { return offsets_[static_cast<size_t>(b)]; }
  const std::vector<ConeBlock>& blocks() const { return blocks_; }

  bool polyhedral() const;

  Vector project(const Vector& z) const;
  /// Direct blockwise polar projection, verified against the Moreau
  /// complement z - project(z); disagreement is a hard error.
  Vector project_polar(const Vector& z) const;

  /// dist(y, K)
  double feasibility_gap(const Vector& y) const;

  /// lambda in N_K(y), tested through y = Pi_K(y + lambda).
  /// Throws if y itself is infeasible beyond tol.
  bool normal_cone_contains(const Vector& y, const Vector& lambda,
                            double tol = 1e-8) const;

 private:
  void check_dim(const Vector& z, const char* op) const;

  std::vector<ConeBlock> blocks_;
  std::vector<Index> offsets_;
  Index total_dim_ = 0;
};

// ---------------------------------------------------------------------------
// Facial classification of a complementary pair (ybar, lambdabar)
// ---------------------------------------------------------------------------

struct OrthantFace {
  std::vector<Index> strict;    // active constraint, nonzero multiplier
  std::vector<Index> weak;      // active constraint, zero multiplier
  std::vector<Index> inactive;  // strictly feasible coordinate
};

enum class SocCase {
  Interior,           // y interior, lambda = 0
  ApexZero,           // y = 0, lambda = 0
  ApexPolarInterior,  // y = 0, lambda interior to the polar
  ApexPolarBoundary,  // y = 0, lambda on the polar boundary, nonzero
  BoundaryZero,       // y boundary nonzero, lambda = 0
  BoundaryActive,     // y boundary nonzero, lambda nonzero
};

struct SocFace {
  SocCase tag;
  Vector dir;          // unit tail direction of y (Boundary*) or lambda (ApexPolarBoundary)
  double y_head = 0;   // y0 for the boundary cases
  double mult_scale = 0;  // t >= 0 with lambda = t * (-1, dir)
};

struct PsdFace {
  Matrix basis;  // eigenvectors of ybar + lambdabar, eigenvalues descending
  Vector eig;
  std::vector<Index> alpha;  // positive eigenvalues (rank space of ybar)
  std::vector<Index> beta;   // joint kernel
  std::vector<Index> gamma;  // negative eigenvalues (rank space of lambdabar)
};

struct BlockFace {
  ConeKind kind;
  Index dim = 0;
  OrthantFace orthant;  // valid for orthant kinds
  SocFace soc;          // valid for SecondOrder
  PsdFace psd;          // valid for Psd
};

struct FaceDescriptor {
  ProductCone cone;
  std::vector<BlockFace> faces;
  std::vector<std::string> ambiguities;  // near-threshold classifications
};

/// Classify the face of K at (y, lambda). Requires lambda in N_K(y); a
/// violated complementarity or infeasible y is an error. Classification
/// decisions use |value| <= tol_rank * (1 + block scale); borderline values
/// are recorded in `ambiguities`.
FaceDescriptor face_descriptor(const ProductCone& k, const Vector& y,
                               const Vector& lambda, double tol_rank = 1e-8);

// ---------------------------------------------------------------------------
// Critical cone C_K(ybar, lambdabar) = T_K(ybar) ∩ lambdabar^perp and its
// polar, through exact facial formulas.
// ---------------------------------------------------------------------------

/// Normalized infeasibility of h w.r.t. the critical cone (0 inside).
double critical_cone_violation(const FaceDescriptor& fd, const Vector& h);
double critical_polar_violation(const FaceDescriptor& fd, const Vector& w);

bool critical_cone_contains(const FaceDescriptor& fd, const Vector& h,
                            double tol = 1e-9);
bool critical_polar_contains(const FaceDescriptor& fd, const Vector& w,
                             double tol = 1e-9);

Vector project_onto_critical_cone(const FaceDescriptor& fd, const Vector& h);
Vector project_onto_critical_polar(const FaceDescriptor& fd, const Vector& w);
Vector project_onto_normal_cone(const FaceDescriptor& fd, const Vector& w);

// ---------------------------------------------------------------------------
// Directional derivative of the projection and the curvature (sigma) term
// ---------------------------------------------------------------------------

/// Pi'_K(z; h) where the face descriptor classifies (Pi_K(z), z - Pi_K(z)).
Vector proj_dirderiv(const FaceDescriptor& fd, const Vector& h);

/// Pi'_K(z; h) at an arbitrary base point.
Vector proj_dirderiv(const ProductCone& k, const Vector& z, const Vector& h);

/// Quadratic form Upsilon(h) = -sigma(lambdabar, T^2_K(ybar, h)) and its
/// gradient, evaluated as global quadratic forms (their values have meaning
/// on the critical cone). Zero on polyhedral blocks.
double sigma_form(const FaceDescriptor& fd, const Vector& h);
Vector sigma_form_gradient(const FaceDescriptor& fd, const Vector& h);

/// Checked variants: error if h lies outside the critical cone beyond tol.
double sigma_term(const FaceDescriptor& fd, const Vector& h, double tol = 1e-7);
Vector sigma_gradient(const FaceDescriptor& fd, const Vector& h,
                      double tol = 1e-7);

/// Membership in the graphical derivative of the normal cone map:
/// dlambda in D N_K(zbar | mubar)(dy). Evaluates both characterizations
/// (projection-derivative identity and the critical-cone triple) and throws
/// if they disagree beyond tolerance.
bool normal_graph_deriv_contains(const ProductCone& k, const Vector& zbar,
                                 const Vector& mubar, const Vector& dy,
                                 const Vector& dlambda, double tol = 1e-8);

}  // namespace calmkit
