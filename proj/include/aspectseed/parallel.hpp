#pragma once

// Thin wrapper over OpenMP so kernels compile with or without it.

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aspectseed {

// How a kernel may execute. Deterministic forces the serial path.
struct ExecPolicy {
  int threads = 0;  // 0: OpenMP default
  bool deterministic = false;

  bool parallel() const { return !deterministic && resolved_threads() > 1; }

  int resolved_threads() const {
    if (deterministic) return 1;
#ifdef _OPENMP
    return threads > 0 ? threads : omp_get_max_threads();
#else
    return 1;
#endif
  }

  static ExecPolicy serial() { return ExecPolicy{1, true}; }
};

inline int thread_index() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

}  // namespace aspectseed
