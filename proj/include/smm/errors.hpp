#pragma once

#include <stdexcept>
#include <string>

namespace smm {

// Error taxonomy. ValidationError means the input violates a documented
// precondition (CLI exit 2); the others mean a computation could not be
// completed (CLI exit 3).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed matrices, unstable model where stability is
// required, out-of-range parameters.
struct ValidationError : Error {
  using Error::Error;
};

// Structurally impossible request (dimension mismatch and the like) that
// indicates a programming error rather than bad data.
struct StructuralError : Error {
  using Error::Error;
};

// A solver failed to reach its tolerance.
struct NumericalError : Error {
  using Error::Error;
};

// A computation would exceed a resource cap (combinatorial blow-up,
// truncation-level cap).
struct ResourceError : Error {
  using Error::Error;
};

// The ODE integrator aborted (state left the admissible region).
struct IntegrationError : Error {
  using Error::Error;
};

}  // namespace smm
