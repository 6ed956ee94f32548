#include "icr/parallel.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace icr {

int configure_threads_from_env() {
  if (const char* env = std::getenv("ICR_THREADS")) {
    try {
      const int requested = std::stoi(env);
      if (requested > 0) omp_set_num_threads(requested);
    } catch (const std::exception&) {
      // unparsable value: keep the runtime default
    }
  }
  return worker_count();
}

void set_worker_count(int workers) {
  omp_set_num_threads(workers > 0 ? workers : omp_get_num_procs());
}

int worker_count() { return omp_get_max_threads(); }

}  // namespace icr
