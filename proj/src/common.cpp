#include "tfem/common.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tfem {

void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace tfem
