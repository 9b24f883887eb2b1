#include "earsleep/error.hpp"
#include "earsleep/stage.hpp"

namespace earsleep {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyRecording: return "EmptyRecording";
    case ErrorKind::InvalidCutoff: return "InvalidCutoff";
    case ErrorKind::NonFiniteSample: return "NonFiniteSample";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::DegenerateEpoch: return "DegenerateEpoch";
    case ErrorKind::SmoteInfeasible: return "SmoteInfeasible";
    case ErrorKind::SplitInfeasible: return "SplitInfeasible";
    case ErrorKind::SingleClassTraining: return "SingleClassTraining";
    case ErrorKind::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::ModelFormatError: return "ModelFormatError";
    case ErrorKind::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::OnsetUndefined: return "OnsetUndefined";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::string_view to_string(SleepStage s) {
  switch (s) {
    case SleepStage::Awake: return "AWAKE";
    case SleepStage::Core: return "CORE";
    case SleepStage::Deep: return "DEEP";
    case SleepStage::REM: return "REM";
  }
  return "?";
}

std::optional<SleepStage> parse_stage(std::string_view text) {
  for (auto s : kAllStages)
    if (text == to_string(s)) return s;
  return std::nullopt;
}

std::string_view to_string(Task t) { return t == Task::Binary ? "binary" : "multistage"; }

std::optional<Task> parse_task(std::string_view text) {
  if (text == "binary") return Task::Binary;
  if (text == "multistage") return Task::Multistage;
  return std::nullopt;
}

const std::vector<std::string>& class_names(Task t) {
  static const std::vector<std::string> binary = {"AWAKE", "ASLEEP"};
  static const std::vector<std::string> multi = {"AWAKE", "CORE", "DEEP", "REM"};
  return t == Task::Binary ? binary : multi;
}

int class_index(SleepStage s, Task t) {
  if (t == Task::Binary) return static_cast<int>(to_binary(s));
  return static_cast<int>(s);
}

}  // namespace earsleep
