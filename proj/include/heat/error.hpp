#pragma once

#include <stdexcept>
#include <string>

namespace heat {

/// Failure categories shared by the CLI (exit codes) and the service (HTTP status).
enum class ErrorKind {
  validation,   // bad input values
  not_found,    // unknown ids
  conflict,     // state does not allow the operation (no model, training busy)
  data,         // unreadable or inconsistent data files
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {})
      : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Offending input field, when the error is about a single field.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message, std::string field = {}) {
  throw Error(kind, message, std::move(field));
}

const char* to_string(ErrorKind kind);

}  // namespace heat
