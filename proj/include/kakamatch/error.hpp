#pragma once

#include <stdexcept>
#include <string>

namespace kakamatch {

// Invalid argument to a pipeline operation (bad sigma, bad k, dimension mismatch...).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or truncated input data (codec, feature files, reports).
struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degenerate model-fitting input (rank-deficient homography system etc.).
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration file or out-of-range option value.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unknown identifier in an index lookup.
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kakamatch
