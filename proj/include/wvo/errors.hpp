#pragma once

#include <stdexcept>
#include <string>

namespace wvo {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an API contract (wrong family kind, bad sizes, bad flags).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data outside a model's support or malformed on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: failed initialization, a stuck chain, a degenerate objective.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class InitializationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateContextError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace wvo
