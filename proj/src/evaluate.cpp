#include "earsleep/evaluate.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "earsleep/error.hpp"

namespace earsleep::evaluate {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> names)
    : class_names(std::move(names)), counts(class_names.size(), std::vector<std::uint64_t>(class_names.size(), 0)) {}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (const auto& r : counts)
    for (auto c : r) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < size(); ++i) s += counts[i][i];
  return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t t) const {
  std::uint64_t s = 0;
  for (auto c : counts[t]) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t p) const {
  std::uint64_t s = 0;
  for (const auto& r : counts) s += r[p];
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.class_names != class_names) throw Error(ErrorKind::ShapeError, "confusion matrices use different classes");
  for (std::size_t t = 0; t < size(); ++t)
    for (std::size_t p = 0; p < size(); ++p) counts[t][p] += other.counts[t][p];
  return *this;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          const std::vector<std::string>& class_names) {
  if (truth.size() != predicted.size())
    throw Error(ErrorKind::ShapeError,
                fmt::format("{} true labels vs {} predictions", truth.size(), predicted.size()));
  ConfusionMatrix cm(class_names);
  const auto k = static_cast<int>(class_names.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k)
      throw Error(ErrorKind::ShapeError, fmt::format("label at position {} is outside the class order", i));
    ++cm.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return cm;
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics class_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw Error(ErrorKind::EmptyEvaluation, "confusion matrix is empty");
  ClassMetrics m;
  for (std::size_t c = 0; c < cm.size(); ++c) {
    const std::uint64_t tp = cm.counts[c][c];
    const std::uint64_t fn = cm.row_sum(c) - tp;
    const std::uint64_t fp = cm.col_sum(c) - tp;
    const std::uint64_t tn = total - tp - fn - fp;
    m.per_class.push_back({ratio(tp, tp + fn), ratio(tn, tn + fp)});
  }
  m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  return m;
}

double cohens_kappa(const ConfusionMatrix& cm) {
  const double n = static_cast<double>(cm.total());
  if (n == 0) throw Error(ErrorKind::EmptyEvaluation, "confusion matrix is empty");
  const double p0 = static_cast<double>(cm.trace()) / n;
  double pe = 0.0;
  for (std::size_t c = 0; c < cm.size(); ++c)
    pe += static_cast<double>(cm.row_sum(c)) * static_cast<double>(cm.col_sum(c));
  pe /= n * n;
  if (pe >= 1.0) return p0 >= 1.0 ? 1.0 : 0.0;
  return (p0 - pe) / (1.0 - pe);
}

ParticipantReport per_participant(std::span<const std::string> expected, std::span<const std::string> participant,
                                  std::span<const int> truth, std::span<const int> predicted, int positive_class) {
  if (participant.size() != truth.size() || truth.size() != predicted.size())
    throw Error(ErrorKind::ShapeError, "participant, truth and prediction columns differ in length");

  struct Tally {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Tally> tally;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& t = tally[participant[i]];
    const bool pos_true = truth[i] == positive_class;
    const bool pos_pred = predicted[i] == positive_class;
    if (pos_true && pos_pred) ++t.tp;
    else if (pos_true) ++t.fn;
    else if (pos_pred) ++t.fp;
    else ++t.tn;
  }

  ParticipantReport report;
  std::vector<std::string> ids(expected.begin(), expected.end());
  for (const auto& [id, _] : tally)
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  std::sort(ids.begin(), ids.end());

  for (const auto& id : ids) {
    auto it = tally.find(id);
    if (it == tally.end()) {
      report.warnings.push_back(fmt::format("participant {} has no test samples; skipped", id));
      continue;
    }
    const Tally& t = it->second;
    ParticipantMetrics row;
    row.participant_id = id;
    row.n = t.tp + t.tn + t.fp + t.fn;
    row.accuracy = static_cast<double>(t.tp + t.tn) / static_cast<double>(row.n);
    row.sensitivity = ratio(t.tp, t.tp + t.fn);
    row.specificity = ratio(t.tn, t.tn + t.fp);
    row.f1 = ratio(2 * t.tp, 2 * t.tp + t.fp + t.fn);
    if (!row.specificity)
      report.warnings.push_back(fmt::format("participant {}: specificity undefined (no negative epochs)", id));
    if (!row.sensitivity)
      report.warnings.push_back(fmt::format("participant {}: sensitivity undefined (no positive epochs)", id));
    report.rows.push_back(std::move(row));
  }
  return report;
}

double weighted_accuracy(std::span<const ParticipantMetrics> rows) {
  double num = 0.0, den = 0.0;
  for (const auto& r : rows) {
    num += r.accuracy * static_cast<double>(r.n);
    den += static_cast<double>(r.n);
  }
  if (den == 0.0) throw Error(ErrorKind::EmptyEvaluation, "no evaluated samples");
  return num / den;
}

// ---------------------------------------------------------------------------

std::vector<AsleepEpoch> asleep_sequence(const signal::Hypnogram& hyp) {
  std::vector<AsleepEpoch> out;
  out.reserve(hyp.entries.size());
  for (const auto& e : hyp.entries) out.push_back({e.start_ms, is_asleep(e.stage)});
  return out;
}

std::optional<std::int64_t> sleep_onset(std::span<const AsleepEpoch> epochs, std::size_t run) {
  if (run == 0) return std::nullopt;
  std::size_t length = 0;
  std::int64_t run_start = 0, prev = 0;
  for (const auto& e : epochs) {
    if (!e.asleep) {
      length = 0;
    } else {
      if (length == 0 || e.start_ms - prev != signal::kEpochMs) {
        length = 0;
        run_start = e.start_ms;
      }
      ++length;
      if (length >= run) return run_start;
    }
    prev = e.start_ms;
  }
  return std::nullopt;
}

std::optional<std::int64_t> sleep_onset(const signal::Hypnogram& hyp, std::size_t run) {
  return sleep_onset(asleep_sequence(hyp), run);
}

OnsetComparison onset_delay(std::span<const AsleepEpoch> predicted, std::int64_t reference_onset_ms, std::size_t run) {
  if (predicted.empty()) throw Error(ErrorKind::OnsetUndefined, "predicted hypnogram is empty");
  const auto p = sleep_onset(predicted, run);
  if (!p) throw Error(ErrorKind::OnsetUndefined, "predicted hypnogram has no qualifying asleep run");
  OnsetComparison c;
  c.predicted_ms = *p;
  c.reference_ms = reference_onset_ms;
  c.delay_min = static_cast<double>(c.predicted_ms - c.reference_ms) / 60'000.0;
  return c;
}

OnsetComparison onset_delay(std::span<const AsleepEpoch> predicted, std::span<const AsleepEpoch> reference,
                            std::size_t run) {
  if (reference.empty()) throw Error(ErrorKind::OnsetUndefined, "reference hypnogram is empty");
  const auto r = sleep_onset(reference, run);
  if (!r) throw Error(ErrorKind::OnsetUndefined, "reference hypnogram has no qualifying asleep run");
  return onset_delay(predicted, *r, run);
}

OnsetComparison onset_delay(const signal::Hypnogram& predicted, const signal::Hypnogram& reference, std::size_t run) {
  return onset_delay(asleep_sequence(predicted), asleep_sequence(reference), run);
}

double mean_absolute_delay(std::span<const OnsetComparison> rows) {
  if (rows.empty()) throw Error(ErrorKind::EmptyEvaluation, "no onset comparisons");
  double s = 0.0;
  for (const auto& r : rows) s += std::abs(r.delay_min);
  return s / static_cast<double>(rows.size());
}

std::string format_confusion(const ConfusionMatrix& cm) {
  std::string out = "true\\pred";
  for (const auto& n : cm.class_names) out += "," + n;
  out += "\n";
  for (std::size_t t = 0; t < cm.size(); ++t) {
    out += cm.class_names[t];
    for (auto c : cm.counts[t]) out += fmt::format(",{}", c);
    out += "\n";
  }
  return out;
}

}  // namespace earsleep::evaluate
