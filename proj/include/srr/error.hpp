#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srr {

enum class ErrorCode {
  ZeroNorm,
  DomainError,
  ShapeMismatch,
  DimensionMismatch,
  FormatError,
  CorruptModel,
  TruncatedFile,
  NoSafeCandidate,
  NonFiniteGradient,
  DivergedTraining,
  InsufficientPrompts,
  MetricPreconditionFailed,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace srr
