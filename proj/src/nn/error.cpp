#include "srr/error.hpp"

namespace srr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NoSafeCandidate: return "NoSafeCandidate";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::DivergedTraining: return "DivergedTraining";
    case ErrorCode::InsufficientPrompts: return "InsufficientPrompts";
    case ErrorCode::MetricPreconditionFailed: return "MetricPreconditionFailed";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace srr
