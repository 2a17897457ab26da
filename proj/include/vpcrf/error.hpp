#pragma once

#include <stdexcept>
#include <string>

namespace vpcrf {

// Malformed or inconsistent input data (corpus files, embedding files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration or command-line usage.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatches and non-finite values inside the numeric core.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vpcrf
