#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earsleep/signal.hpp"

namespace earsleep::evaluate {

/// counts[t][p] = number of samples with true class t predicted as p.
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::uint64_t>> counts;

  explicit ConfusionMatrix(std::vector<std::string> names = {});

  std::size_t size() const { return class_names.size(); }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t t) const;
  std::uint64_t col_sum(std::size_t p) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          const std::vector<std::string>& class_names);

/// One-vs-rest rates; nullopt when the denominator is zero (no true members
/// of the class, or no non-members).
struct ClassRates {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

struct ClassMetrics {
  std::vector<ClassRates> per_class;
  double accuracy = 0.0;
};

/// Throws EmptyEvaluation for an all-zero matrix.
ClassMetrics class_metrics(const ConfusionMatrix& cm);

/// Cohen's kappa; defined as 1 when chance agreement and observed agreement
/// are both 1.
double cohens_kappa(const ConfusionMatrix& cm);

struct ParticipantMetrics {
  std::string participant_id;
  std::size_t n = 0;
  double accuracy = 0.0;
  std::optional<double> sensitivity;  // positive class recall
  std::optional<double> specificity;  // negative class recall
  std::optional<double> f1;           // positive class
};

struct ParticipantReport {
  std::vector<ParticipantMetrics> rows;
  std::vector<std::string> warnings;
};

/// Binary per-participant metrics. `expected` lists every held-out
/// participant; those without test samples are skipped with a warning.
ParticipantReport per_participant(std::span<const std::string> expected, std::span<const std::string> participant,
                                  std::span<const int> truth, std::span<const int> predicted, int positive_class = 1);

/// Mean of per-row accuracies weighted by row sizes.
double weighted_accuracy(std::span<const ParticipantMetrics> rows);

// ---------------------------------------------------------------------------

inline constexpr std::size_t kOnsetRun = 3;

/// Per-epoch sleep/wake decision on the 30 s grid.
struct AsleepEpoch {
  std::int64_t start_ms = 0;
  bool asleep = false;
};

std::vector<AsleepEpoch> asleep_sequence(const signal::Hypnogram& hyp);

/// Start of the first run of `run` consecutive (adjacent 30 s slots) asleep
/// epochs, or nullopt.
std::optional<std::int64_t> sleep_onset(std::span<const AsleepEpoch> epochs, std::size_t run = kOnsetRun);
std::optional<std::int64_t> sleep_onset(const signal::Hypnogram& hyp, std::size_t run = kOnsetRun);

struct OnsetComparison {
  std::string recording_id;
  std::int64_t predicted_ms = 0;
  std::int64_t reference_ms = 0;
  double delay_min = 0.0;  // positive: classifier later than reference
};

/// Throws OnsetUndefined when either side has no qualifying run.
OnsetComparison onset_delay(const signal::Hypnogram& predicted, const signal::Hypnogram& reference,
                            std::size_t run = kOnsetRun);
OnsetComparison onset_delay(std::span<const AsleepEpoch> predicted, std::span<const AsleepEpoch> reference,
                            std::size_t run = kOnsetRun);
/// Reference onset supplied directly (e.g. reported by the reference device).
OnsetComparison onset_delay(std::span<const AsleepEpoch> predicted, std::int64_t reference_onset_ms,
                            std::size_t run = kOnsetRun);

double mean_absolute_delay(std::span<const OnsetComparison> rows);

/// Plain count table: header `true\pred,<classes...>`, one row per true class.
std::string format_confusion(const ConfusionMatrix& cm);

}  // namespace earsleep::evaluate
