#pragma once

#include <stdexcept>
#include <string>

namespace cclaims {

// Base error for everything raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration (bad flag values, out-of-range parameters).
// The CLI maps these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data (datasets, calibration artifacts,
// records that violate a precondition at runtime). Exit code 1.
class DataError : public Error {
 public:
  using Error::Error;
};

// External backend failure: transport, auth, or unparseable response.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace cclaims
