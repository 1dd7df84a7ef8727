#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scr {

enum class ErrorCode {
  // trajectory grammar
  EmptyInput,
  MissingTag,
  UnbalancedTag,
  OrderViolation,
  DanglingRevision,
  MissingRevision,
  TrailingContentAfterT,
  NoVerdict,
  EmptyAnswer,
  // answers
  NoBox,
  UnbalancedBraces,
  // rewards / config
  InconsistentState,
  InvalidConfig,
  // masks
  MissingVerdict,
  AlignmentError,
  // grpo
  GroupTooSmall,
  LengthMismatch,
  NonFiniteInput,
  EmptyMask,
  // synthesis
  UpstreamFailure,
  ExhaustedAttempts,
  InvariantViolation,
  PreconditionFailed,
  // analysis
  MissingCounter,
  MalformedInteger,
  EmptyTrajectory,
  // simulation
  DivergedParameters,
  // io
  IoError,
  MalformedRecord,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace scr
