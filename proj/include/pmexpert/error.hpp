#ifndef PMEXPERT_ERROR_HPP
#define PMEXPERT_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmexpert {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  EntryOutOfRange,
  RowSumDeficient,
  EmptyClassSet,
  InvalidKernel,
  RateIncrease,
  NegativePhi,
  ZeroTransition,
  ZeroObservationProbability,
  InvariantViolation,
  LengthMismatch,
  LossOutOfRange,
  DegenerateFit,
  PathExplosion,
  OutcomeExplosion,
  ConfigError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EntryOutOfRange: return "EntryOutOfRange";
    case ErrorCode::RowSumDeficient: return "RowSumDeficient";
    case ErrorCode::EmptyClassSet: return "EmptyClassSet";
    case ErrorCode::InvalidKernel: return "InvalidKernel";
    case ErrorCode::RateIncrease: return "RateIncrease";
    case ErrorCode::NegativePhi: return "NegativePhi";
    case ErrorCode::ZeroTransition: return "ZeroTransition";
    case ErrorCode::ZeroObservationProbability: return "ZeroObservationProbability";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::LossOutOfRange: return "LossOutOfRange";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::PathExplosion: return "PathExplosion";
    case ErrorCode::OutcomeExplosion: return "OutcomeExplosion";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pmexpert

#endif  // PMEXPERT_ERROR_HPP
