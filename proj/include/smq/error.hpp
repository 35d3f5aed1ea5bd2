#pragma once

#include <stdexcept>
#include <string>

namespace smq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: dimension mismatch, bad grid, invalid weights.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A physical admissibility check failed (CP, trace, positivity).
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace smq
