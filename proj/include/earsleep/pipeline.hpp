#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "earsleep/dataset.hpp"
#include "earsleep/evaluate.hpp"
#include "earsleep/features.hpp"
#include "earsleep/forest.hpp"
#include "earsleep/signal.hpp"

namespace earsleep::pipeline {

struct ProcessConfig {
  signal::PhaseMode phase = signal::PhaseMode::ZeroPhase;
  signal::RejectionLimits limits;
  unsigned threads = 0;
};

struct ProcessedRecording {
  std::vector<signal::Epoch> epochs;  // every segmented epoch, annotated
  std::vector<std::optional<features::FeatureVector>> features;  // Clean, non-degenerate only
  signal::RejectionSummary summary;
  std::size_t degenerate = 0;
};

/// resample -> bandpass -> segment -> reject -> extract.
ProcessedRecording process_recording(const signal::Recording& raw, const signal::Hypnogram& hyp,
                                     const ProcessConfig& config = {});

/// Resampled and filtered signal cut into annotated epochs (no features).
std::vector<signal::Epoch> condition_and_segment(const signal::Recording& raw, const signal::Hypnogram& hyp,
                                                 const ProcessConfig& config = {});

void append_rows(dataset::FeatureTable& table, const ProcessedRecording& rec, const std::string& participant_id,
                 const std::string& recording_id);

// ---------------------------------------------------------------------------

struct CvConfig {
  Task task = Task::Binary;
  dataset::CvVariant cv = dataset::CvVariant::LeaveOneParticipantOut;
  std::uint64_t seed = 42;
  forest::ForestParams forest;
  std::size_t smote_k = 5;
  std::size_t window_before = 2;
  std::size_t window_after = 2;
  /// Apply the temporal window under stratified k-fold too. Leaks neighbour
  /// epochs into the test folds; only for demonstrating that leakage.
  bool window_stratified = false;
  std::size_t folds = 10;

  bool windowed() const { return cv == dataset::CvVariant::LeaveOneParticipantOut || window_stratified; }
};

struct FoldResult {
  std::string name;
  std::size_t n_train = 0;
  std::size_t n_train_balanced = 0;
  std::size_t n_test = 0;
  evaluate::ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::optional<double> kappa;
};

struct CvReport {
  CvConfig config;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  std::vector<FoldResult> folds;
  evaluate::ConfusionMatrix pooled;
  evaluate::ClassMetrics metrics;
  double kappa = 0.0;
  double majority_rate = 0.0;  // accuracy of always predicting the most frequent class
  std::optional<evaluate::ParticipantReport> participants;  // binary task only
  std::vector<double> importances;                          // mean over folds
  std::vector<std::string> warnings;
  dataset::SplitPlan plan;
};

/// Builds the dataset the protocol prescribes (windowed for LOPO), then per
/// fold: SMOTE on the training part only, train a forest, score the test part.
/// Throws SplitInfeasible if a task class is missing.
CvReport cross_validate(const dataset::FeatureTable& table, const CvConfig& config);

dataset::Dataset build_dataset(const dataset::FeatureTable& table, const CvConfig& config);

/// Final model on all samples (SMOTE-balanced), with the windowing recorded
/// in its metadata so that inference can rebuild matching inputs.
forest::ForestModel train_final(const dataset::FeatureTable& table, const CvConfig& config);

std::string report_json(const CvReport& report);
std::string importances_csv(const std::vector<std::string>& names, const std::vector<double>& values);

// ---------------------------------------------------------------------------

/// Per-epoch asleep decisions of `model` for one recording's feature rows.
std::vector<evaluate::AsleepEpoch> predict_asleep(const forest::ForestModel& model, const dataset::FeatureTable& rows);

/// Time x frequency Welch power over 0.5-30 Hz, one row per epoch with its
/// stage, as a text table.
std::string spectrogram_csv(const std::vector<signal::Epoch>& epochs);

}  // namespace earsleep::pipeline
