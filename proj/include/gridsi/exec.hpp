#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gridsi {

/// Execution policy for the data-parallel kernels. Serial is the reference
/// path; Parallel runs the same loop bodies under OpenMP. Loop bodies write
/// disjoint outputs, so both paths produce bit-identical results.
enum class ExecMode { Serial, Parallel };

template <class F>
void parallel_for(int n, ExecMode mode, F&& body) {
#ifdef _OPENMP
  if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
#else
  (void)mode;
#endif
  for (int i = 0; i < n; ++i) body(i);
}

}  // namespace gridsi
