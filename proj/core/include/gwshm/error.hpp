#pragma once

#include <stdexcept>
#include <string>

namespace gwshm {

/// Base class for all library failures.  Subclasses partition failures by
/// who has to fix them: the configuration, the input data, or the numerics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run configuration is malformed, inconsistent, or out of range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data (CSV ensembles, model files) is missing, malformed, or
/// violates a structural precondition such as uniform record length.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computation cannot proceed: singular matrix without a permitted
/// fallback, non-convergent iteration, invalid argument to a special
/// function, and similar.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Process exit codes used by the command-line front end.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDataError = 3;
inline constexpr int kExitNumericError = 4;

}  // namespace gwshm
