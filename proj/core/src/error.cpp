#include "fmprior/error.hpp"

namespace fmprior {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDegenerateMesh: return "DegenerateMesh";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kDisconnectedMesh: return "DisconnectedMesh";
    case ErrorCode::kConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kVersionError: return "VersionError";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kSigmaOutOfRange: return "SigmaOutOfRange";
    case ErrorCode::kDistortionBoundExceeded: return "DistortionBoundExceeded";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConvergenceFailure:
    case ErrorCode::kSingularSystem:
    case ErrorCode::kNonFinite:
    case ErrorCode::kDistortionBoundExceeded:
      return 4;
    default:
      return 3;
  }
}

}  // namespace fmprior
