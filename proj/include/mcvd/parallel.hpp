#pragma once

// OpenMP compatibility shim. Code outside this header never includes <omp.h>
// directly so the library still builds (serially) with MCVD_USE_OPENMP=OFF.

#ifdef MCVD_HAVE_OPENMP
#include <omp.h>
#endif

namespace mcvd::parallel {

inline int max_threads() {
#ifdef MCVD_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Thread count to use for a parallel region: `requested` when positive,
/// otherwise the OpenMP default.
inline int resolve_threads(int requested) {
    return requested > 0 ? requested : max_threads();
}

}  // namespace mcvd::parallel
