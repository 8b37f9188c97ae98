#include "safekernel/errors.hpp"

namespace safekernel {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::control_bound: return "control_bound";
    case ErrorKind::policy_fault: return "policy_fault";
    case ErrorKind::grid_mismatch: return "grid_mismatch";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::out_of_domain: return "out_of_domain";
    case ErrorKind::empty_feasible_set: return "empty_feasible_set";
    case ErrorKind::arena_too_crowded: return "arena_too_crowded";
    case ErrorKind::scene_generation: return "scene_generation";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::io: return "io";
    case ErrorKind::schema: return "schema";
    case ErrorKind::non_convergence: return "non_convergence";
  }
  return "unknown";
}

}  // namespace safekernel
