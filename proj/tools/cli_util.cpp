#include "cli_util.hpp"

namespace scr::cli {

int exit_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UpstreamFailure:
    case ErrorCode::ExhaustedAttempts:
      return kUpstreamFailure;
    case ErrorCode::InvariantViolation:
    case ErrorCode::InconsistentState:
    case ErrorCode::DivergedParameters:
      return kInvariantViolation;
    default:
      return kInputError;
  }
}

Input::Input(const std::string& path) {
  if (path.empty() || path == "-") return;
  file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*file_) throw Error(ErrorCode::IoError, "cannot open " + path);
}

Output::Output(const std::string& path) {
  if (path.empty() || path == "-") return;
  writer_ = std::make_unique<AtomicFileWriter>(path);
}

void Output::commit() {
  if (writer_) {
    writer_->commit();
  } else {
    std::cout.flush();
    if (!std::cout) throw Error(ErrorCode::IoError, "failed writing stdout");
  }
}

}  // namespace scr::cli
