#pragma once

namespace safekernel {

/// Caps OpenMP parallelism at SAFEKERNEL_THREADS when it is set to a
/// positive integer. Returns the thread count in effect (1 without OpenMP).
int apply_thread_limit_from_env();

}  // namespace safekernel
