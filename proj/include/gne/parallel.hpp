#pragma once

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gne {

// Execution mode of the per-agent kernels. Serial is the reference path;
// Parallel fans the same kernels over OpenMP threads. Results are bitwise
// identical in both modes: each kernel writes only its own block and all
// reductions stay sequential with a fixed order.
enum class ExecMode { Serial, Parallel };

template <class Fn>
inline void agent_for(int n, ExecMode mode, Fn&& fn) {
#ifdef _OPENMP
  if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#else
  (void)mode;
#endif
  for (int i = 0; i < n; ++i) fn(i);
}

// Honors GNE_PARALLEL=1; defaults to the serial reference path.
inline ExecMode default_exec_mode() {
  const char* env = std::getenv("GNE_PARALLEL");
  return (env && env[0] == '1') ? ExecMode::Parallel : ExecMode::Serial;
}

inline const char* exec_mode_name(ExecMode m) {
  return m == ExecMode::Parallel ? "parallel" : "serial";
}

}  // namespace gne
