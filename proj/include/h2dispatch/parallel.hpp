#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace h2d {

inline int default_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Runs body(i) for i in [0, n). Every iteration writes only to its own output
// cells, so the result is identical for any thread count.
template <class F>
void parallel_for(long n, int threads, F&& body) {
#ifdef _OPENMP
    if (threads > 1 && n > 1) {
#pragma omp parallel for num_threads(threads) schedule(static)
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
#else
    (void)threads;
#endif
    for (long i = 0; i < n; ++i) body(i);
}

} // namespace h2d
