#include "anomamind/error.hpp"

namespace anomamind {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileMissing: return "FileMissing";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::LabelLengthMismatch: return "LabelLengthMismatch";
    case ErrorCode::ConstantSeries: return "ConstantSeries";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::SpanOutOfBounds: return "SpanOutOfBounds";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::IntervalOutOfBounds: return "IntervalOutOfBounds";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::ParamValidation: return "ParamValidation";
    case ErrorCode::BackendReplyUnparseable: return "BackendReplyUnparseable";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::MissingPlanTag: return "MissingPlanTag";
    case ErrorCode::NoCallsFound: return "NoCallsFound";
    case ErrorCode::MalformedCall: return "MalformedCall";
    case ErrorCode::NoJsonArray: return "NoJsonArray";
    case ErrorCode::FieldMissing: return "FieldMissing";
    case ErrorCode::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case ErrorCode::KeyMissing: return "KeyMissing";
    case ErrorCode::BadRating: return "BadRating";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::ReplayMiss: return "ReplayMiss";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ToolBudgetExceeded: return "ToolBudgetExceeded";
    case ErrorCode::RoleFailure: return "RoleFailure";
    case ErrorCode::TraceCorrupt: return "TraceCorrupt";
    case ErrorCode::MissingTruth: return "MissingTruth";
    case ErrorCode::WindowTruthMismatch: return "WindowTruthMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

}  // namespace anomamind
