#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lipsync {

enum class ErrorCode {
  OutOfFrame,
  BadArgument,
  DegenerateFace,
  DegenerateData,
  BadRank,
  UnsupportedRate,
  TooShort,
  DelayTooLarge,
  EmptyDataset,
  ShapeMismatch,
  SizeMismatch,
  EmptyBox,
  EmptyText,
  AlignmentError,
  MissingFile,
  ParseError,
  InsufficientTargetFrames,
  VerificationFailed,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfFrame: return "OutOfFrame";
    case ErrorCode::BadArgument: return "BadArgument";
    case ErrorCode::DegenerateFace: return "DegenerateFace";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::BadRank: return "BadRank";
    case ErrorCode::UnsupportedRate: return "UnsupportedRate";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::DelayTooLarge: return "DelayTooLarge";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::EmptyBox: return "EmptyBox";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InsufficientTargetFrames: return "InsufficientTargetFrames";
    case ErrorCode::VerificationFailed: return "VerificationFailed";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception type thrown by every module. The code is stable and is what the
/// CLI reports in its machine-readable error object.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lipsync
