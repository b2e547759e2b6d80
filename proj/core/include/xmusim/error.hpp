#pragma once

#include <stdexcept>
#include <string>

namespace xmusim {

// Process exit code associated with each failure category.
enum class ErrorKind : int {
  usage = 1,
  data = 2,
  numeric = 3,
  service = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error(ErrorKind::usage, message) {}
};

/// Malformed input, inconsistent shapes, failed file I/O.
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

/// Non-finite loss or gradients during optimisation.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error(ErrorKind::numeric, message) {}
};

/// Failures talking to (or interpreting the output of) an external text-generation service.
class ServiceError : public Error {
 public:
  explicit ServiceError(const std::string& message) : Error(ErrorKind::service, message) {}
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace xmusim
