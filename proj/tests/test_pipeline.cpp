#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "earsleep/error.hpp"
#include "earsleep/pipeline.hpp"
#include "earsleep/synth.hpp"

using namespace earsleep;
using namespace earsleep::pipeline;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an earsleep::Error");
  return ErrorKind::InvalidArgument;
}

struct Cohort {
  std::vector<synth::SyntheticNight> nights;
  dataset::FeatureTable table;
};

// Four participants, one 40-minute night each; built once.
const Cohort& small_cohort() {
  static const Cohort cohort = [] {
    synth::CohortConfig cfg;
    cfg.n_participants = 4;
    cfg.duration_min = 40.0;
    cfg.seed = 3;
    Cohort c;
    c.nights = synth::gen_cohort(cfg);
    for (const auto& n : c.nights)
      append_rows(c.table, process_recording(n.recording, n.hypnogram), n.participant_id, n.recording_id);
    return c;
  }();
  return cohort;
}

CvConfig quick(Task task, dataset::CvVariant cv) {
  CvConfig c;
  c.task = task;
  c.cv = cv;
  c.forest.n_trees = 15;
  c.folds = 5;
  return c;
}

}  // namespace

TEST_CASE("processing keeps exactly the clean, non-degenerate epochs") {
  auto profiles = synth::ProfileSet::defaults();
  profiles.set_spike_prob(0.02);
  const auto night = synth::gen_night(200.0, profiles, 8);
  const auto rec = process_recording(night.recording, night.hypnogram);
  REQUIRE(rec.epochs.size() == night.hypnogram.entries.size());
  CHECK(rec.features.size() == rec.epochs.size());
  std::size_t with_features = 0, injected = 0;
  for (std::size_t i = 0; i < rec.epochs.size(); ++i) {
    with_features += rec.features[i].has_value();
    injected += night.spiked[i];
    if (rec.epochs[i].artifact != signal::Artifact::Clean) CHECK_FALSE(rec.features[i].has_value());
  }
  CHECK(with_features == rec.summary.clean - rec.degenerate);
  CHECK(rec.summary.amplitude == injected);
  CHECK(rec.summary.total() == rec.epochs.size());

  dataset::FeatureTable table;
  append_rows(table, rec, "P09", "P09_N1");
  CHECK(table.rows.size() == with_features);
  CHECK(std::is_sorted(table.rows.begin(), table.rows.end(),
                       [](const auto& a, const auto& b) { return a.start_ms < b.start_ms; }));
}

TEST_CASE("processing is deterministic across thread counts") {
  const auto& night = small_cohort().nights[0];
  ProcessConfig one, many;
  one.threads = 1;
  many.threads = 3;
  const auto a = process_recording(night.recording, night.hypnogram, one);
  const auto b = process_recording(night.recording, night.hypnogram, many);
  CHECK(a.features == b.features);
}

TEST_CASE("LOPO is windowed and stratified k-fold is not") {
  const auto& table = small_cohort().table;
  const auto lopo = build_dataset(table, quick(Task::Binary, dataset::CvVariant::LeaveOneParticipantOut));
  const auto kfold = build_dataset(table, quick(Task::Binary, dataset::CvVariant::StratifiedKFold));
  CHECK(lopo.x.cols() == 130);
  CHECK(kfold.x.cols() == 26);
  auto leaky = quick(Task::Binary, dataset::CvVariant::StratifiedKFold);
  leaky.window_stratified = true;
  CHECK(build_dataset(table, leaky).x.cols() == 130);
  CHECK(lopo.size() == table.rows.size());
  CHECK(kfold.size() == table.rows.size());
}

TEST_CASE("cross-validation scores every sample once and never oversamples test folds") {
  const auto& table = small_cohort().table;
  for (auto cv : {dataset::CvVariant::LeaveOneParticipantOut, dataset::CvVariant::StratifiedKFold}) {
    for (auto task : {Task::Binary, Task::Multistage}) {
      CAPTURE(static_cast<int>(cv));
      CAPTURE(static_cast<int>(task));
      const auto r = cross_validate(table, quick(task, cv));
      CHECK(r.pooled.total() == table.rows.size());
      std::size_t tested = 0;
      double weighted = 0.0;
      for (std::size_t f = 0; f < r.folds.size(); ++f) {
        const auto& fold = r.folds[f];
        tested += fold.n_test;
        weighted += fold.accuracy * static_cast<double>(fold.n_test);
        CHECK(fold.confusion.total() == fold.n_test);
        CHECK(fold.n_train + fold.n_test == table.rows.size());
        CHECK(fold.n_train_balanced >= fold.n_train);
        // No test sample's (recording, epoch) appears in its training set.
        std::set<std::pair<std::string, std::int64_t>> train_keys;
        for (auto i : r.plan.train_indices(f)) train_keys.insert({table.rows[i].recording_id, table.rows[i].start_ms});
        for (auto i : r.plan.test_indices(f))
          CHECK(train_keys.count({table.rows[i].recording_id, table.rows[i].start_ms}) == 0);
      }
      CHECK(tested == table.rows.size());
      CHECK(weighted / static_cast<double>(tested) == doctest::Approx(r.metrics.accuracy).epsilon(1e-12));
      const double sum = std::accumulate(r.importances.begin(), r.importances.end(), 0.0);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(r.importances.size() == r.feature_names.size());
    }
  }
}

TEST_CASE("LOPO folds hold out one participant and report per-participant rows") {
  const auto r = cross_validate(small_cohort().table, quick(Task::Binary, dataset::CvVariant::LeaveOneParticipantOut));
  REQUIRE(r.folds.size() == 4);
  CHECK(r.folds[0].name == "P01");
  REQUIRE(r.participants.has_value());
  CHECK(r.participants->rows.size() == 4);
  CHECK(evaluate::weighted_accuracy(r.participants->rows) == doctest::Approx(r.metrics.accuracy).epsilon(1e-12));
  CHECK_FALSE(cross_validate(small_cohort().table, quick(Task::Multistage, dataset::CvVariant::LeaveOneParticipantOut))
                  .participants.has_value());
}

TEST_CASE("cross-validation is deterministic, including across thread counts") {
  auto cfg = quick(Task::Multistage, dataset::CvVariant::StratifiedKFold);
  cfg.forest.threads = 1;
  const auto a = report_json(cross_validate(small_cohort().table, cfg));
  cfg.forest.threads = 4;
  const auto b = report_json(cross_validate(small_cohort().table, cfg));
  CHECK(a == b);
  cfg.seed = 43;
  CHECK(report_json(cross_validate(small_cohort().table, cfg)) != a);
}

TEST_CASE("a class missing from the whole dataset is named") {
  auto table = small_cohort().table;
  std::erase_if(table.rows, [](const auto& r) { return r.label == SleepStage::REM; });
  const auto cfg = quick(Task::Multistage, dataset::CvVariant::LeaveOneParticipantOut);
  CHECK(kind_of([&] { cross_validate(table, cfg); }) == ErrorKind::SplitInfeasible);
  CHECK_THROWS_WITH(cross_validate(table, cfg), doctest::Contains("REM"));
  // The binary task is unaffected.
  CHECK_NOTHROW(cross_validate(table, quick(Task::Binary, dataset::CvVariant::LeaveOneParticipantOut)));
}

TEST_CASE("the final model records its windowing and drives onset prediction") {
  const auto& c = small_cohort();
  const auto model = train_final(c.table, quick(Task::Binary, dataset::CvVariant::LeaveOneParticipantOut));
  CHECK(model.metadata.at("task") == "binary");
  CHECK(model.metadata.at("window_before") == "2");
  CHECK(model.n_features == 130);
  CHECK(model.feature_names.size() == 130);

  dataset::FeatureTable rows;
  for (const auto& r : c.table.rows)
    if (r.recording_id == c.nights[1].recording_id) rows.rows.push_back(r);
  std::reverse(rows.rows.begin(), rows.rows.end());
  const auto seq = predict_asleep(model, rows);
  REQUIRE(seq.size() == rows.rows.size());
  CHECK(std::is_sorted(seq.begin(), seq.end(), [](auto& a, auto& b) { return a.start_ms < b.start_ms; }));
  // In-sample predictions of a training recording agree with its labels.
  std::size_t agree = 0;
  for (const auto& e : seq) {
    const auto it = std::find_if(rows.rows.begin(), rows.rows.end(), [&](auto& r) { return r.start_ms == e.start_ms; });
    agree += e.asleep == is_asleep(it->label);
  }
  CHECK(static_cast<double>(agree) / static_cast<double>(seq.size()) > 0.95);
}

TEST_CASE("report and importance exports") {
  const auto r = cross_validate(small_cohort().table, quick(Task::Binary, dataset::CvVariant::LeaveOneParticipantOut));
  const auto json = report_json(r);
  for (const char* key : {"\"task\"", "\"cv\"", "\"folds\"", "\"aggregate\"", "\"kappa\"", "\"majority_rate\"",
                          "\"per_class\"", "\"participants\"", "\"importances\""})
    CHECK(json.find(key) != std::string::npos);

  const auto csv = importances_csv({"a", "b", "c"}, {0.2, 0.5, 0.3});
  CHECK(csv == "rank,feature,importance\n1,b,0.5\n2,c,0.3\n3,a,0.2\n");
}

TEST_CASE("spectrogram rows follow the epochs") {
  const auto& night = small_cohort().nights[2];
  const auto epochs = condition_and_segment(night.recording, night.hypnogram);
  const auto csv = spectrogram_csv(epochs);
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  CHECK(header.rfind("epoch_start_ms,stage,0.5", 0) == 0);
  const auto n_cols = std::count(header.begin(), header.end(), ',') + 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') + 1 == n_cols);
  }
  CHECK(rows == epochs.size());
  // 0.5 .. 29.75 Hz at 0.25 Hz resolution.
  CHECK(n_cols == 2 + 118);
}

TEST_CASE("a zero-signal night yields an all-zero spectrogram") {
  auto night = synth::gen_night(10.0, synth::ProfileSet::defaults(), 1);
  std::fill(night.recording.uv.begin(), night.recording.uv.end(), 0.0);
  const auto csv = spectrogram_csv(condition_and_segment(night.recording, night.hypnogram));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream fields(line);
    std::string cell;
    std::getline(fields, cell, ',');
    std::getline(fields, cell, ',');
    while (std::getline(fields, cell, ',')) CHECK(std::stod(cell) == 0.0);
  }
  CHECK(rows == 20);
}

TEST_CASE("deep epochs dominate the delta rows of the spectrogram") {
  const auto night = synth::gen_night(240.0, synth::ProfileSet::defaults(), 12);
  const auto epochs = condition_and_segment(night.recording, night.hypnogram);
  std::istringstream in(spectrogram_csv(epochs));
  std::string line;
  std::getline(in, line);
  // Columns 2..15 are 0.5..3.75 Hz.
  double deep = 0, other = 0;
  std::size_t n_deep = 0, n_other = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string cell, stage;
    std::getline(fields, cell, ',');
    std::getline(fields, stage, ',');
    double delta = 0;
    for (int k = 0; k < 14 && std::getline(fields, cell, ','); ++k) delta += std::stod(cell);
    if (stage == "DEEP") deep += delta, ++n_deep;
    else other += delta, ++n_other;
  }
  REQUIRE(n_deep > 0);
  REQUIRE(n_other > 0);
  CHECK(deep / double(n_deep) > 2.0 * other / double(n_other));
}
