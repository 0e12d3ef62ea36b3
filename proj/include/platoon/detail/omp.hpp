#pragma once

// Lets kernels carry OpenMP pragmas that compile away cleanly (and without
// unknown-pragma warnings) when OpenMP is disabled.

#if defined(_OPENMP)
#include <omp.h>
#define PLATOON_OMP(directive) _Pragma(#directive)
#else
#define PLATOON_OMP(directive)
#endif

namespace platoon::detail {

inline int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace platoon::detail
