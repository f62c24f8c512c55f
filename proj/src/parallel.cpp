// calmkit - stability analysis for conic programs
// Copyright (c) 2026 calmkit contributors
// Licensed under Apache 2.0

#include "calmkit/parallel.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace calmkit {

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body,
                  Exec exec) {
#if defined(_OPENMP)
  if (exec == Exec::OpenMP) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
#else
  (void)exec;
#endif
  for (std::int64_t i = 0; i < n; ++i) {
    body(i);
  }
}

}  // namespace calmkit
