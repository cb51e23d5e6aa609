#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace icl {

enum class ErrorCode {
  UnknownTask,
  DomainExhausted,
  TokenizationMismatch,
  UnknownScope,
  UnknownSymbol,
  PlanOutOfRange,
  InvalidPlan,
  SequenceTooLong,
  CorruptFile,
  ConfigMismatch,
  DivergenceDetected,
  AlignmentError,
  DegenerateBaseline,
  InfeasibleGrid,
  InvalidCounts,
  DegenerateVariance,
  ZeroVector,
  TooFewItems,
  BadConfig,
  MissingWeights,
  CorruptResult,
  UndefinedInput,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::DomainExhausted: return "DomainExhausted";
    case ErrorCode::TokenizationMismatch: return "TokenizationMismatch";
    case ErrorCode::UnknownScope: return "UnknownScope";
    case ErrorCode::UnknownSymbol: return "UnknownSymbol";
    case ErrorCode::PlanOutOfRange: return "PlanOutOfRange";
    case ErrorCode::InvalidPlan: return "InvalidPlan";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::DegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::InfeasibleGrid: return "InfeasibleGrid";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::TooFewItems: return "TooFewItems";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::MissingWeights: return "MissingWeights";
    case ErrorCode::CorruptResult: return "CorruptResult";
    case ErrorCode::UndefinedInput: return "UndefinedInput";
  }
  return "Unknown";
}

// Every failure in the library surfaces as an Error carrying a code, so
// callers (and tests) can branch on the category rather than the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace icl
