#include "ctrace/error.hpp"

namespace ctrace {

std::string_view error_code(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::InvalidArgument: return "invalid_argument";
  case ErrorKind::Validation: return "validation_error";
  case ErrorKind::NotFound: return "not_found";
  case ErrorKind::Conflict: return "conflict";
  case ErrorKind::UnknownSubscriber: return "unknown_subscriber";
  case ErrorKind::DuplicateWorkflow: return "duplicate_workflow";
  case ErrorKind::InvalidToken: return "invalid_token";
  case ErrorKind::ModeMismatch: return "mode_mismatch";
  case ErrorKind::Parse: return "parse_error";
  case ErrorKind::Io: return "io_error";
  }
  return "internal";
}

} // namespace ctrace
