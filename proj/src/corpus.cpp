// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "calmkit/types.hpp"

namespace calmkit::corpus {

namespace {

// p1: equality-degenerate scalar problem. Every lambda is a multiplier at
// x = 0; lambda = -1/2 kills the Lagrangian Hessian (critical), lambda = 1
// keeps it definite (noncritical).
const char* kP1 = R"({
  "name": "p1",
  "description": "min 1/2 x^2 subject to x^2 = 0; multiplier set is the whole line",
  "n": 1,
  "cone": [{"kind": "zero", "dim": 1}],
  "f": {"Q": [[1.0]], "c": [0.0], "r": 0.0},
  "g": [{"A": [[2.0]], "b": [0.0], "d": 0.0}],
  "points": [
    {"name": "critical", "x": [0.0], "lambda": [-0.5]},
    {"name": "noncritical", "x": [0.0], "lambda": [1.0]}
  ]
}
)";

// p2: inequality-degenerate scalar problem with multiplier set R_+.
const char* kP2 = R"({
  "name": "p2",
  "description": "min x^2 subject to x^2 <= 0; multiplier set is the nonnegative ray",
  "n": 1,
  "cone": [{"kind": "orthant_nonpos", "dim": 1}],
  "f": {"Q": [[2.0]], "c": [0.0], "r": 0.0},
  "g": [{"A": [[2.0]], "b": [0.0], "d": 0.0}],
  "points": [
    {"name": "lam0", "x": [0.0], "lambda": [0.0]},
    {"name": "lam1", "x": [0.0], "lambda": [1.0]},
    {"name": "lam10", "x": [0.0], "lambda": [10.0]}
  ]
}
)";

// p3: linear objective over the second-order cone; unique noncritical
// multiplier, S_KKT isolated calm.
const char* kP3 = R"({
  "name": "p3",
  "description": "min x1 subject to x in the second-order cone; unique multiplier",
  "n": 2,
  "cone": [{"kind": "soc", "dim": 2}],
  "f": {"Q": [[0.0, 0.0], [0.0, 0.0]], "c": [1.0, 0.0], "r": 0.0},
  "g": [
    {"A": [[0.0, 0.0], [0.0, 0.0]], "b": [1.0, 0.0], "d": 0.0},
    {"A": [[0.0, 0.0], [0.0, 0.0]], "b": [0.0, 1.0], "d": 0.0}
  ],
  "points": [
    {"name": "unique", "x": [0.0, 0.0], "lambda": [-1.0, 0.0]}
  ]
}
)";

// p4: scalar variable mapped onto the 2x2 psd cone through x*diag(1,-1);
// the multiplier set is the negative-semidefinite matrices with equal
// diagonal. g rows are svec coordinates (m11, sqrt2*m21, m22).
const char* kP4 = R"({
  "name": "p4",
  "description": "min 1/2 x^2 subject to x*diag(1,-1) psd; matrix multiplier set",
  "n": 1,
  "cone": [{"kind": "psd", "dim": 3}],
  "f": {"Q": [[1.0]], "c": [0.0], "r": 0.0},
  "g": [
    {"A": [[0.0]], "b": [1.0], "d": 0.0},
    {"A": [[0.0]], "b": [0.0], "d": 0.0},
    {"A": [[0.0]], "b": [-1.0], "d": 0.0}
  ],
  "points": [
    {"name": "degenerate", "x": [0.0], "lambda": [0.0, 0.0, 0.0]}
  ]
}
)";

const std::map<std::string, std::string>& table() {
  static const std::map<std::string, std::string> t = {
      {"p1", kP1}, {"p2", kP2}, {"p3", kP3}, {"p4", kP4}};
  return t;
}

}  // namespace

std::vector<std::string> names() { return {"p1", "p2", "p3", "p4"}; }

const std::string& problem_json(const std::string& name) {
  auto it = table().find(name);
  if (it == table().end()) {
    throw Error("corpus", "unknown problem '" + name + "'");
  }
  return it->second;
}

std::vector<std::string> emit(const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (const std::string& name : names()) {
    std::filesystem::path p = std::filesystem::path(dir) / (name + ".json");
    std::ofstream out(p);
    if (!out) throw Error("corpus", "cannot write " + p.string());
    out << problem_json(name);
    paths.push_back(p.string());
  }
  return paths;
}

}  // namespace calmkit::corpus
