#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hydec {

// Every data-parallel loop in this codebase runs through parallel_index_for
// with results written by index, so the serial and OpenMP paths produce
// bit-identical output. kSerial is the reference path the tests compare
// against.
enum class ExecPolicy { kSerial, kParallel };

struct ExecConfig {
  ExecPolicy policy = ExecPolicy::kParallel;
  int threads = 0;  // 0 = runtime default
};

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// fn(i) must not let exceptions escape; callers record per-item errors.
template <typename Fn>
void parallel_index_for(size_t n, const ExecConfig& exec, Fn&& fn) {
#ifdef _OPENMP
  if (exec.policy == ExecPolicy::kParallel && n > 1) {
    const int threads = exec.threads > 0 ? exec.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      fn(static_cast<size_t>(i));
    }
    return;
  }
#else
  (void)exec;
#endif
  for (size_t i = 0; i < n; ++i) {
    fn(i);
  }
}

}  // namespace hydec
