// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#pragma once

#include <cstdint>
#include <functional>

namespace calmkit {

/// Execution policy for data-parallel sampling loops. Serial is the
/// reference path; OpenMP must produce bit-identical aggregates because
/// every sample writes to its own slot and reductions run serially after.
enum class Exec { Serial, OpenMP };

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body,
                  Exec exec);

}  // namespace calmkit
