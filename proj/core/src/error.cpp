#include "scr/error.hpp"

namespace scr {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingTag: return "MissingTag";
    case ErrorCode::UnbalancedTag: return "UnbalancedTag";
    case ErrorCode::OrderViolation: return "OrderViolation";
    case ErrorCode::DanglingRevision: return "DanglingRevision";
    case ErrorCode::MissingRevision: return "MissingRevision";
    case ErrorCode::TrailingContentAfterT: return "TrailingContentAfterT";
    case ErrorCode::NoVerdict: return "NoVerdict";
    case ErrorCode::EmptyAnswer: return "EmptyAnswer";
    case ErrorCode::NoBox: return "NoBox";
    case ErrorCode::UnbalancedBraces: return "UnbalancedBraces";
    case ErrorCode::InconsistentState: return "InconsistentState";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingVerdict: return "MissingVerdict";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::UpstreamFailure: return "UpstreamFailure";
    case ErrorCode::ExhaustedAttempts: return "ExhaustedAttempts";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::MissingCounter: return "MissingCounter";
    case ErrorCode::MalformedInteger: return "MalformedInteger";
    case ErrorCode::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorCode::DivergedParameters: return "DivergedParameters";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
  }
  return "Unknown";
}

}  // namespace scr
