#pragma once

#include <stdexcept>
#include <string>

namespace optexec {

// Raised when an operation requires a drift regime it was not given
// (e.g. solving the stationary value ODE with mu >= 0).
struct RegimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Series start requested beyond its validity range.
struct CutoffTooLargeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// g' left [0,1] during integration, or a marched grid lost monotonicity.
struct MonotonicityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalBlowupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Explicit HJB march asked to run with an unstable time step.
struct CflError : std::runtime_error {
  CflError(const std::string& msg, long required_nt_)
      : std::runtime_error(msg), required_nt(required_nt_) {}
  long required_nt;
};

// A policy emitted a positive (buying) rate.
struct AdmissibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Value function / parameter mismatch between collaborating components.
struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace optexec
