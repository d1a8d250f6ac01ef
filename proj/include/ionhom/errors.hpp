#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ionhom {

enum class ErrorKind {
  InvalidInput,
  ResolutionMismatch,
  DomainError,
  NotConverged,
  IncompatibleRHS,
  SingularSystem,
  PicardDivergence,
  PositivityLoss,
  InvariantViolation,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::IncompatibleRHS: return "IncompatibleRHS";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::PicardDivergence: return "PicardDivergence";
    case ErrorKind::PositivityLoss: return "PositivityLoss";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ionhom
