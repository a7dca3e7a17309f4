#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fmprior {

enum class ErrorCode {
  kParseError,
  kDegenerateMesh,
  kIndexOutOfRange,
  kDisconnectedMesh,
  kConvergenceFailure,
  kKTooLarge,
  kShapeMismatch,
  kSingularSystem,
  kNonFinite,
  kEmptyDataset,
  kVersionError,
  kFormatError,
  kSigmaOutOfRange,
  kDistortionBoundExceeded,
  kInvalidArgument,
  kIoError,
};

std::string_view to_string(ErrorCode code);

// Process exit status for a failure: 3 for data errors, 4 for numerical failures.
int exit_status(ErrorCode code);

// what() is "<CodeName>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace fmprior
