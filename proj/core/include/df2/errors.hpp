#pragma once

#include <stdexcept>
#include <string>

namespace df2 {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector/matrix shapes that do not agree with the model or objective.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, file contents or invalid argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf in inputs, gradients or losses; singular systems.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An operation was called in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace df2
