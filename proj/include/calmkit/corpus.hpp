// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <string>
#include <vector>

namespace calmkit::corpus {

/// Names of the built-in problems, in canonical order: p1..p4.
std::vector<std::string> names();

/// JSON text of a built-in problem file.
const std::string& problem_json(const std::string& name);

/// Write every built-in problem to <dir>/<name>.json. Returns the paths.
std::vector<std::string> emit(const std::string& dir);

}  // namespace calmkit::corpus
