#pragma once

#include <stdexcept>
#include <string>

namespace glmfunk {

// Base for every error raised by the library. The subclasses map onto
// the command-line exit codes (config = 2, data = 3, numerical = 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or option combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (dimensions, domains, graphs).
class DataError : public Error {
 public:
  using Error::Error;
};

// Divergence, degenerate estimates, infeasible programs.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace glmfunk
