#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bdwd {

/// Coarse error classes surfaced by the CLI as exit codes.
enum class ErrorCategory { config, data, numeric, resource };

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Malformed input: bad labels, non-finite values, violated preconditions.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCategory::data, what) {}
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::config, what) {}
};

/// A query fell outside the domain where a quantity is defined.
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what)
      : Error(ErrorCategory::numeric, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorCategory::numeric, what) {}
};

/// Requested work exceeds a configured budget.
class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& what)
      : Error(ErrorCategory::resource, what) {}
};

}  // namespace bdwd
