#include "safekernel/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace safekernel {

int apply_thread_limit_from_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("SAFEKERNEL_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // not a number: leave the OpenMP default
    }
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace safekernel
