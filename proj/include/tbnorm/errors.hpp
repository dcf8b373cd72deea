#pragma once

#include <stdexcept>
#include <string>

namespace tbnorm {

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid run configuration (bad key, value or combination).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace tbnorm
