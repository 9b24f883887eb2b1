#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace earsleep {

enum class ErrorKind {
  EmptyRecording,
  InvalidCutoff,
  NonFiniteSample,
  NoOverlap,
  DegenerateEpoch,
  SmoteInfeasible,
  SplitInfeasible,
  SingleClassTraining,
  NonFiniteFeature,
  ShapeError,
  ModelFormatError,
  EmptyEvaluation,
  OnsetUndefined,
  ParseError,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so that
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace earsleep
