#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "earsleep/features.hpp"
#include "earsleep/matrix.hpp"
#include "earsleep/stage.hpp"

namespace earsleep::dataset {

/// One row of the exported feature matrix.
struct EpochFeatures {
  features::FeatureVector values{};
  SleepStage label = SleepStage::Awake;
  std::string participant_id;
  std::string recording_id;
  std::int64_t start_ms = 0;
};

struct FeatureTable {
  std::vector<EpochFeatures> rows;
};

std::string feature_table_header();
void write_feature_table(const std::string& path, const FeatureTable& table);
std::string format_feature_table(const FeatureTable& table);
FeatureTable read_feature_table(const std::string& path);
FeatureTable parse_feature_table(std::string_view text);

/// Model-ready samples. Row i of `x` belongs to the remaining per-row fields.
struct Dataset {
  Matrix x;
  std::vector<SleepStage> stage;
  std::vector<std::string> participant_id;
  std::vector<std::string> recording_id;
  std::vector<std::int64_t> start_ms;
  std::vector<std::size_t> epoch_index;  // 30 s slot offset from the recording's first epoch
  std::size_t window_before = 0;
  std::size_t window_after = 0;

  std::size_t size() const { return stage.size(); }
  std::size_t window_size() const { return window_before + 1 + window_after; }
  std::vector<int> classes(Task task) const;
};

std::vector<std::string> feature_names(std::size_t before, std::size_t after);

/// One sample per epoch, no temporal context.
Dataset unwindowed(const FeatureTable& table);

/// Concatenates the features of `before` preceding and `after` succeeding
/// clean epochs of the same recording around each center epoch, in time
/// order [t-before .. t+after]. Missing neighbours (recording edges, rejected
/// epochs) replicate the nearest available clean epoch.
Dataset window(const FeatureTable& table, std::size_t before = 2, std::size_t after = 2);

// ---------------------------------------------------------------------------

struct SmoteParams {
  std::size_t k_neighbors = 5;
  std::uint64_t seed = 0;
};

struct SyntheticOrigin {
  std::size_t base = 0;      // row in the input matrix
  std::size_t neighbor = 0;  // row in the input matrix
  double gap = 0.0;          // interpolation weight in [0, 1)
};

struct SmoteResult {
  Matrix x;                 // originals first (unchanged, same order), then synthetic rows
  std::vector<int> y;
  std::size_t n_original = 0;
  std::vector<SyntheticOrigin> origin;  // one per synthetic row
  std::vector<int> duplicate_fallback_classes;  // classes with a single member
};

/// Oversamples every class of [0, n_classes) up to the majority count.
/// Throws SmoteInfeasible if any class is empty.
SmoteResult smote(const Matrix& x, std::span<const int> y, std::size_t n_classes, const SmoteParams& params);

// ---------------------------------------------------------------------------

enum class CvVariant { StratifiedKFold, LeaveOneParticipantOut };

std::string_view to_string(CvVariant v);

struct SplitPlan {
  CvVariant variant = CvVariant::StratifiedKFold;
  std::uint64_t seed = 0;
  std::size_t n_folds = 0;
  std::vector<std::size_t> fold;        // fold of each sample
  std::vector<std::string> fold_names;  // held-out participant for LOPO

  std::vector<std::size_t> test_indices(std::size_t f) const;
  std::vector<std::size_t> train_indices(std::size_t f) const;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Stratified k-fold shuffles each class with `seed` and deals its members
/// round-robin over the folds; LOPO makes one fold per participant (sorted).
SplitPlan make_splits(std::span<const int> classes, std::span<const std::string> participants, CvVariant variant,
                      std::uint64_t seed, std::size_t k = 10);

/// Audit table `sample_id,fold,role`.
std::string format_split_plan(const SplitPlan& plan);

}  // namespace earsleep::dataset
