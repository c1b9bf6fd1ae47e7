#pragma once

#include <stdexcept>
#include <string>

namespace jsq {

/// Invalid parameters or malformed input documents. The CLI maps this to
/// exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A run that started but could not complete (failed audit, runaway cycle,
/// IO). The CLI maps this to exit code 3.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few usable tail levels for a fit.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace jsq
