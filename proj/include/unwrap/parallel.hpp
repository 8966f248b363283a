#pragma once

#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace unwrap {

/// Execution policy for the data-parallel kernels. Every kernel has a plain
/// serial loop and an OpenMP loop over the same per-element function; outputs
/// are written by index, so both paths produce bit-identical results and the
/// serial path doubles as the reference implementation in tests.
enum class Exec { Serial, Parallel };

template <typename F>
inline void for_each_index(Exec exec, std::int64_t n, F&& f) {
    if (exec == Exec::Serial) {
        for (std::int64_t i = 0; i < n; ++i) f(i);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) f(i);
#else
    for (std::int64_t i = 0; i < n; ++i) f(i);
#endif
}

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace unwrap
