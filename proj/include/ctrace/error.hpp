#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctrace {

enum class ErrorKind {
  InvalidArgument,
  Validation,
  NotFound,
  Conflict,
  UnknownSubscriber,
  DuplicateWorkflow,
  InvalidToken,
  ModeMismatch,
  Parse,
  Io,
};

/// Stable machine-readable identifier used in the HTTP error envelope.
std::string_view error_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

} // namespace ctrace
