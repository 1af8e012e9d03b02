#pragma once

#include <stdexcept>
#include <string>

namespace wstan {

// Exit-code families used by the command line: usage/config (1), data (2),
// numeric (3).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not line up for an operation.
class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wstan
