#pragma once

#include <stdexcept>
#include <string>

namespace flutterlife {

// Exit-code contract of the CLI: 0 success, 1 usage/config, 2 data, 3 numerical.
enum class ExitCode : int {
  Ok = 0,
  Config = 1,
  Data = 2,
  Numerical = 3,
};

// Bad configuration or missing upstream artifacts.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Algorithm failed to converge or produced non-finite results.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace flutterlife
