#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace seqicp {

/// Runs body(i) for i in [0, count). Iterations must write only to their own
/// slots. Uses OpenMP when available; nested calls run serially. The first
/// exception thrown by any iteration is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
#ifdef _OPENMP
  if (!omp_in_parallel() && count > 1 && omp_get_max_threads() > 1) {
    std::exception_ptr error;
    std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    return;
  }
#endif
  for (std::size_t i = 0; i < count; ++i) body(i);
}

}  // namespace seqicp
