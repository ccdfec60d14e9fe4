#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lingame {

enum class ErrorCode {
  MissingSentiment,
  OutOfRangeScore,
  EmptyColumn,
  InvalidSpec,
  NonNumericResponse,
  ProviderFailure,
  ParseFailure,
  TooFewPoints,
  DegenerateDesign,
  NoIncludedStudies,
  ZeroStandardError,
  InvalidInitialState,
  InvalidArgument,
  InconsistentInput,
  ParseError,
  SchemaError,
  IoError,
  Internal,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported through this type; `code()` is the
// machine-readable reason and what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lingame
