#pragma once

namespace icr {

/// Reads ICR_THREADS (0 or unset = runtime default) and applies it to the
/// OpenMP runtime. Returns the resulting worker count.
int configure_threads_from_env();

void set_worker_count(int workers);
int worker_count();

}  // namespace icr
