#include <algorithm>

#include <Eigen/Core>

#include "ain/kernels.hpp"

#if defined(AIN_HAVE_OPENMP)
#include <omp.h>
#endif

namespace ain {

void set_num_threads(int n) {
    n = std::max(n, 1);
#if defined(AIN_HAVE_OPENMP)
    omp_set_num_threads(n);
#endif
    Eigen::setNbThreads(n);
}

int num_threads() { return Eigen::nbThreads(); }

}  // namespace ain
