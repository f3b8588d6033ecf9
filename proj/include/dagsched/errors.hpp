#pragma once

#include <stdexcept>
#include <string>

namespace dagsched {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid domain objects or parameters (bad probability, dangling edge, ...).
struct ValidationError : Error {
  using Error::Error;
};

/// A task graph turned out to be cyclic.
struct CycleError : ValidationError {
  using ValidationError::ValidationError;
};

/// File or JSON problems: missing files, malformed schemas, truncated data.
struct IoError : Error {
  using Error::Error;
};

/// Model/network dimension mismatches (wrong machine count, wrong shapes).
struct IncompatibilityError : Error {
  using Error::Error;
};

/// A schedule that cannot be executed at all (cross-machine order deadlock).
struct InfeasibleError : Error {
  using Error::Error;
};

}  // namespace dagsched
