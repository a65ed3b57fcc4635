// Error types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace kdvbs {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Implicit step matrix could not be factorized.
class StepFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A ratio of functionals was requested on an identically zero trajectory.
class UndefinedRatio : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config error [" + key + "]: " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace kdvbs
