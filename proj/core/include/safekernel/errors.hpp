#pragma once

#include <stdexcept>
#include <string>

namespace safekernel {

/// Category of a failure. The CLI maps these onto process exit codes.
enum class ErrorKind {
  invalid_argument,   // violated precondition on a user-supplied value
  control_bound,      // |u| above the admissible control bound
  policy_fault,       // a feedback policy produced a non-finite control
  grid_mismatch,
  insufficient_data,
  out_of_domain,
  empty_feasible_set,
  arena_too_crowded,
  scene_generation,
  protocol,
  io,
  schema,
  non_convergence,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace safekernel
