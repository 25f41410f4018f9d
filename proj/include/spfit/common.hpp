#ifndef SPFIT_COMMON_HPP
#define SPFIT_COMMON_HPP

#include <stdexcept>
#include <string>

namespace spfit {

// Error taxonomy shared by the library and the CLI.  Kinds in the Input
// group map to CLI exit code 2, the rest to exit code 3.
enum class ErrorKind {
  AllCollinear,
  DuplicatePoints,
  DegenerateTriangle,
  PointOutsideMesh,
  NotPositiveDefinite,
  DimensionMismatch,
  RankOutOfBounds,
  NonPositiveResponse,
  UnknownPriorFamily,
  SpecMismatch,
  NonFiniteGradient,
  AdaptationFailed,
  NonFiniteInit,
  ConstantDraws,
  TooFewTailSamples,
  NonFiniteLoglik,
  MismatchedObservations,
  InputNotFound,
  ConfigError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::AllCollinear: return "AllCollinear";
    case ErrorKind::DuplicatePoints: return "DuplicatePoints";
    case ErrorKind::DegenerateTriangle: return "DegenerateTriangle";
    case ErrorKind::PointOutsideMesh: return "PointOutsideMesh";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::RankOutOfBounds: return "RankOutOfBounds";
    case ErrorKind::NonPositiveResponse: return "NonPositiveResponse";
    case ErrorKind::UnknownPriorFamily: return "UnknownPriorFamily";
    case ErrorKind::SpecMismatch: return "SpecMismatch";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::AdaptationFailed: return "AdaptationFailed";
    case ErrorKind::NonFiniteInit: return "NonFiniteInit";
    case ErrorKind::ConstantDraws: return "ConstantDraws";
    case ErrorKind::TooFewTailSamples: return "TooFewTailSamples";
    case ErrorKind::NonFiniteLoglik: return "NonFiniteLoglik";
    case ErrorKind::MismatchedObservations: return "MismatchedObservations";
    case ErrorKind::InputNotFound: return "InputNotFound";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

// True for error kinds caused by bad user input rather than numerical failure.
inline bool is_input_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::AllCollinear:
    case ErrorKind::DuplicatePoints:
    case ErrorKind::PointOutsideMesh:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::RankOutOfBounds:
    case ErrorKind::NonPositiveResponse:
    case ErrorKind::UnknownPriorFamily:
    case ErrorKind::SpecMismatch:
    case ErrorKind::MismatchedObservations:
    case ErrorKind::InputNotFound:
    case ErrorKind::ConfigError:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace spfit

#endif
