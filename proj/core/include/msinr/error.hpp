#pragma once

#include <stdexcept>
#include <string>

namespace msinr {

// Base for every error the library raises. The CLI maps the subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or argument (bad ArchSpec, gamma out of range, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or malformed input data: images, checkpoints, empty splits.
class DataError : public Error {
 public:
  using Error::Error;
};

// Vector/matrix sizes that do not agree with the architecture.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf in an activation, loss, gradient or optimizer state.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace msinr
