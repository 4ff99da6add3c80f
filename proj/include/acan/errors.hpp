#pragma once

#include <stdexcept>
#include <string>

namespace acan {

// Shape mismatch between tensors or against an op's contract.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke an op precondition (non-scalar loss, empty batch, sigma <= 0, ...).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN or Inf produced by a forward or backward pass. Always fatal.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file: bad magic, bad version, truncated payload, bad manifest row.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// finite-difference checker saw two evaluations of f disagree.
struct DeterminismError : std::runtime_error {
  explicit DeterminismError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace acan
