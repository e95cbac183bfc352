#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epistereo {

enum class ErrorCode {
  kBehindCamera,
  kDegenerateBaseline,
  kDegeneratePrincipalRays,
  kSingularHomography,
  kPoleSingularity,
  kOutOfGrid,
  kWindowTooLarge,
  kEmptyRange,
  kImageTooSmall,
  kNonPositiveDisparity,
  kIoError,
  kMalformedPly,
  kMalformedFile,
  kEmptyReference,
  kDivisionByZero,
  kSceneNotVisible,
  kInvalidDepthBounds,
  kInvalidArgument,
  kValidation,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kDegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::kDegeneratePrincipalRays: return "DegeneratePrincipalRays";
    case ErrorCode::kSingularHomography: return "SingularHomography";
    case ErrorCode::kPoleSingularity: return "PoleSingularity";
    case ErrorCode::kOutOfGrid: return "OutOfGrid";
    case ErrorCode::kWindowTooLarge: return "WindowTooLarge";
    case ErrorCode::kEmptyRange: return "EmptyRange";
    case ErrorCode::kImageTooSmall: return "ImageTooSmall";
    case ErrorCode::kNonPositiveDisparity: return "NonPositiveDisparity";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMalformedPly: return "MalformedPly";
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kDivisionByZero: return "DivisionByZero";
    case ErrorCode::kSceneNotVisible: return "SceneNotVisible";
    case ErrorCode::kInvalidDepthBounds: return "InvalidDepthBounds";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kValidation: return "Validation";
  }
  return "Unknown";
}

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace epistereo
