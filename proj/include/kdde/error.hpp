#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kdde {

enum class ErrorCode {
  DimensionMismatch,
  NonFiniteInput,
  DegenerateBounds,
  SchemaError,
  TooFewPoints,
  DegenerateInput,
  MeshDataMismatch,
  SingularGram,
  NotStateInclusive,
  EmptyDataset,
  SpecError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::DegenerateBounds: return "DegenerateBounds";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::MeshDataMismatch: return "MeshDataMismatch";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::NotStateInclusive: return "NotStateInclusive";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::SpecError: return "SpecError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map failure classes without parsing
/// messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kdde
