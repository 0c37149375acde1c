#pragma once

#include <stdexcept>
#include <string>

namespace kplab {

enum class ErrorCode {
  kInvalidArgument,
  kBehindCamera,
  kInvalidDisparity,
  kTooFewTags,
  kSolverDiverged,
  kTooFewViews,
  kDegenerateRays,
  kEmptyInput,
  kSizeMismatch,
  kOutOfRange,
  kDegenerateGeometry,
  kObjectOutsideFrame,
  kSchema,
  kMissingFile,
  kChecksumMismatch,
  kIo,
  kLocked,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable error kind. All library failures
/// surface as this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kBehindCamera: return "behind-camera";
    case ErrorCode::kInvalidDisparity: return "invalid-disparity";
    case ErrorCode::kTooFewTags: return "fewer-than-3-tags";
    case ErrorCode::kSolverDiverged: return "solver-divergence";
    case ErrorCode::kTooFewViews: return "fewer-than-2-views";
    case ErrorCode::kDegenerateRays: return "degenerate-rays";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kSizeMismatch: return "size-mismatch";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorCode::kObjectOutsideFrame: return "object-outside-frame";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kLocked: return "locked";
  }
  return "unknown";
}

}  // namespace kplab
