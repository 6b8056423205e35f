#pragma once

#include <stdexcept>
#include <string>

namespace certilind {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed model description, unknown token, invalid parameter.
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad numerical input: non-finite entries, radicands far from PSD, step underflow.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The adaptive driver could not meet the space tolerance within max_dimension.
struct CertificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace certilind
