#include "lingame/error.hpp"

namespace lingame {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingSentiment: return "MissingSentiment";
    case ErrorCode::OutOfRangeScore: return "OutOfRangeScore";
    case ErrorCode::EmptyColumn: return "EmptyColumn";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NonNumericResponse: return "NonNumericResponse";
    case ErrorCode::ProviderFailure: return "ProviderFailure";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::NoIncludedStudies: return "NoIncludedStudies";
    case ErrorCode::ZeroStandardError: return "ZeroStandardError";
    case ErrorCode::InvalidInitialState: return "InvalidInitialState";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InconsistentInput: return "InconsistentInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace lingame
