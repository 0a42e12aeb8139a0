#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lookaround {

enum class ErrorCode {
  // recording-io
  MalformedHeader,
  MixedSamplingRates,
  TruncatedRecord,
  HeaderPayloadMismatch,
  OutOfBounds,
  NegativeDuration,
  // preprocess
  Unrecoverable,
  MissingElectrode,
  InvalidBand,
  TooShort,
  UpsampleUnsupported,
  // windowing
  TargetOutOfBounds,
  EmptyCategory,
  // model
  IndivisibleLength,
  ShapeMismatch,
  NonFiniteActivation,
  InvalidConfig,
  BadCheckpoint,
  // training
  NonFiniteLoss,
  EmptyValidationSet,
  // inference
  TooShortRecording,
  LengthMismatch,
  // scoring
  DurationMismatch,
  // cli
  MismatchedRecordings,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::MixedSamplingRates: return "MixedSamplingRates";
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::HeaderPayloadMismatch: return "HeaderPayloadMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NegativeDuration: return "NegativeDuration";
    case ErrorCode::Unrecoverable: return "Unrecoverable";
    case ErrorCode::MissingElectrode: return "MissingElectrode";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::UpsampleUnsupported: return "UpsampleUnsupported";
    case ErrorCode::TargetOutOfBounds: return "TargetOutOfBounds";
    case ErrorCode::EmptyCategory: return "EmptyCategory";
    case ErrorCode::IndivisibleLength: return "IndivisibleLength";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyValidationSet: return "EmptyValidationSet";
    case ErrorCode::TooShortRecording: return "TooShortRecording";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DurationMismatch: return "DurationMismatch";
    case ErrorCode::MismatchedRecordings: return "MismatchedRecordings";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace lookaround
