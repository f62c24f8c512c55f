// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace calmkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Error with module/operation context attached at the throw site.
class Error : public std::runtime_error {
 public:
  Error(std::string where, std::string what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// Raised when two computations that must agree disagree.
/// Never caught internally: it signals a formula bug, not a data problem.
class InconsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace calmkit
