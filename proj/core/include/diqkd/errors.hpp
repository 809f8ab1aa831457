#pragma once

#include <stdexcept>
#include <string>

namespace diqkd {

// Invalid parameters or configuration supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (count tables, behaviors, events).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The conic solver could not certify a result.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace diqkd
