#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace seqicp {

enum class ErrorCode {
  InvalidArgument,
  RankDeficient,
  DegenerateResiduals,
  LagTooLarge,
  InvalidGrid,
  InvalidChangePoints,
  EmptyComparisonSet,
  ZeroDenominator,
  DegenerateKernel,
  TooManySubsets,
  ParseError,
  MissingTarget,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DegenerateResiduals: return "DegenerateResiduals";
    case ErrorCode::LagTooLarge: return "LagTooLarge";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::InvalidChangePoints: return "InvalidChangePoints";
    case ErrorCode::EmptyComparisonSet: return "EmptyComparisonSet";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::DegenerateKernel: return "DegenerateKernel";
    case ErrorCode::TooManySubsets: return "TooManySubsets";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingTarget: return "MissingTarget";
  }
  return "Unknown";
}

// Errors that stem from bad user input rather than from the numerics.
constexpr bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::LagTooLarge:
    case ErrorCode::InvalidGrid:
    case ErrorCode::InvalidChangePoints:
    case ErrorCode::TooManySubsets:
    case ErrorCode::ParseError:
    case ErrorCode::MissingTarget:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace seqicp
