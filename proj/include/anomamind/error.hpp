#pragma once

#include <stdexcept>
#include <string>

namespace anomamind {

/// Every failure the engine can report. Tests match on the code, not the
/// message text.
enum class ErrorCode {
  // ingestion / preprocessing
  FileMissing,
  ParseError,
  LabelLengthMismatch,
  ConstantSeries,
  EmptySeries,
  SpanOutOfBounds,
  // analysis tools
  WindowTooShort,
  IntervalOutOfBounds,
  UnknownTool,
  ParamValidation,
  BackendReplyUnparseable,
  // baselines
  SeriesTooShort,
  // agent protocol
  MissingPlaceholder,
  MissingPlanTag,
  NoCallsFound,
  MalformedCall,
  NoJsonArray,
  FieldMissing,
  ConfidenceOutOfRange,
  KeyMissing,
  BadRating,
  // backends
  Timeout,
  HttpError,
  ReplayMiss,
  BackendUnavailable,
  // workflow
  ToolBudgetExceeded,
  RoleFailure,
  TraceCorrupt,
  // evaluation / reward
  MissingTruth,
  WindowTruthMismatch,
  LengthMismatch,
  // generic
  ConfigError,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace anomamind
