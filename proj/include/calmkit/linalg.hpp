// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <vector>

#include "calmkit/types.hpp"

namespace calmkit::linalg {

struct EigResult {
  Vector values;   // sorted descending
  Matrix vectors;  // column i pairs with values[i]; orthonormal
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Deterministic: fixed sweep order, tolerance 1e-12 on the off-diagonal
/// norm relative to the matrix scale, at most 100 sweeps.
EigResult jacobi_eigh(const Matrix& a);

/// Orthonormal basis of the null space of `a` (columns), using a rank
/// threshold relative to the largest singular value. Empty matrix when the
/// kernel is trivial.
Matrix kernel_basis(const Matrix& a, double rel_tol = 1e-10);

/// Minimum-norm least-squares solution of a x = b.
Vector least_squares(const Matrix& a, const Vector& b);

/// Euclidean projection of p onto the affine set {x : a x = b}.
/// Requires the set to be nonempty.
Vector project_affine(const Matrix& a, const Vector& b, const Vector& p);

/// Feasibility of the polyhedron {x : ineq_a x >= ineq_b} by a phase-1
/// simplex with Bland's rule. Free variables, dense, intended for the
/// tiny systems produced by face enumeration. Returns a feasible point
/// through `out` when one exists.
bool lp_feasible(const Matrix& ineq_a, const Vector& ineq_b, Vector* out);

}  // namespace calmkit::linalg
