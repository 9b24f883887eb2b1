#include "earsleep/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <json.hpp>

#include "earsleep/error.hpp"
#include "earsleep/parallel.hpp"
#include "earsleep/random.hpp"

namespace earsleep::pipeline {

using nlohmann::ordered_json;

std::vector<signal::Epoch> condition_and_segment(const signal::Recording& raw, const signal::Hypnogram& hyp,
                                                 const ProcessConfig& config) {
  signal::validate(raw);
  signal::validate(hyp);
  auto rec = signal::resample(raw, signal::kTargetRate);
  signal::FilterSpec spec;
  spec.phase_mode = config.phase;
  rec.uv = signal::apply_filter(rec.uv, spec);
  auto epochs = signal::segment(rec, hyp);
  signal::reject_artifacts(epochs, config.limits);
  return epochs;
}

ProcessedRecording process_recording(const signal::Recording& raw, const signal::Hypnogram& hyp,
                                     const ProcessConfig& config) {
  ProcessedRecording out;
  out.epochs = condition_and_segment(raw, hyp, config);
  out.summary = signal::summarize(out.epochs);
  out.features.resize(out.epochs.size());
  parallel_for(
      out.epochs.size(),
      [&](std::size_t i) {
        const auto& e = out.epochs[i];
        if (e.artifact != signal::Artifact::Clean) return;
        try {
          out.features[i] = features::extract_all(e);
        } catch (const Error& err) {
          if (err.kind() != ErrorKind::DegenerateEpoch) throw;
        }
      },
      config.threads);
  for (std::size_t i = 0; i < out.epochs.size(); ++i)
    if (out.epochs[i].artifact == signal::Artifact::Clean && !out.features[i]) ++out.degenerate;
  return out;
}

void append_rows(dataset::FeatureTable& table, const ProcessedRecording& rec, const std::string& participant_id,
                 const std::string& recording_id) {
  for (std::size_t i = 0; i < rec.epochs.size(); ++i) {
    if (!rec.features[i]) continue;
    table.rows.push_back({*rec.features[i], rec.epochs[i].label, participant_id, recording_id, rec.epochs[i].start_ms});
  }
}

// ---------------------------------------------------------------------------

namespace {

enum SeedTag : std::uint64_t { kSplitSeed = 1, kSmoteSeed, kForestSeed, kFinalSeed };

std::vector<std::size_t> class_counts(std::span<const int> y, std::size_t n_classes) {
  std::vector<std::size_t> counts(n_classes, 0);
  for (int c : y) ++counts[static_cast<std::size_t>(c)];
  return counts;
}

void require_all_classes(std::span<const int> y, const std::vector<std::string>& names) {
  const auto counts = class_counts(y, names.size());
  for (std::size_t c = 0; c < names.size(); ++c)
    if (counts[c] == 0)
      throw Error(ErrorKind::SplitInfeasible,
                  fmt::format("class {} has no samples; add recordings containing {} epochs or choose a task "
                              "without that class",
                              names[c], names[c]));
}

struct Balanced {
  Matrix x;
  std::vector<int> y;
};

// SMOTE over the classes present in `y`; absent classes stay absent.
Balanced balance(const Matrix& x, std::span<const int> y, std::size_t n_classes, std::size_t k, std::uint64_t seed) {
  const auto counts = class_counts(y, n_classes);
  std::vector<int> to_compact(n_classes, -1), to_full;
  for (std::size_t c = 0; c < n_classes; ++c)
    if (counts[c] > 0) {
      to_compact[c] = static_cast<int>(to_full.size());
      to_full.push_back(static_cast<int>(c));
    }
  std::vector<int> yc(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) yc[i] = to_compact[static_cast<std::size_t>(y[i])];
  auto res = dataset::smote(x, yc, to_full.size(), {k, seed});
  Balanced out{std::move(res.x), std::move(res.y)};
  for (int& v : out.y) v = to_full[static_cast<std::size_t>(v)];
  return out;
}

std::string class_label(std::size_t c, const std::vector<std::string>& names) { return names[c]; }

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json confusion_json(const evaluate::ConfusionMatrix& cm) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : cm.counts) rows.push_back(r);
  return rows;
}

}  // namespace

dataset::Dataset build_dataset(const dataset::FeatureTable& table, const CvConfig& config) {
  return config.windowed() ? dataset::window(table, config.window_before, config.window_after)
                           : dataset::unwindowed(table);
}

CvReport cross_validate(const dataset::FeatureTable& table, const CvConfig& config) {
  if (table.rows.empty()) throw Error(ErrorKind::EmptyEvaluation, "feature matrix has no rows");
  const auto ds = build_dataset(table, config);
  const auto y = ds.classes(config.task);

  CvReport report;
  report.config = config;
  report.class_names = class_names(config.task);
  report.feature_names = dataset::feature_names(ds.window_before, ds.window_after);
  require_all_classes(y, report.class_names);

  report.plan = dataset::make_splits(y, ds.participant_id, config.cv, derive_seed(config.seed, {kSplitSeed}),
                                     config.folds);
  const auto& plan = report.plan;
  const std::size_t n_classes = report.class_names.size();

  std::vector<int> predicted(ds.size(), -1);
  std::vector<double> importance_sum(ds.x.cols(), 0.0);
  report.folds.resize(plan.n_folds);
  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    const auto train_idx = plan.train_indices(f);
    const auto test_idx = plan.test_indices(f);
    auto& fold = report.folds[f];
    fold.name = plan.fold_names.empty() ? fmt::format("fold{}", f) : plan.fold_names[f];
    fold.n_train = train_idx.size();
    fold.n_test = test_idx.size();

    std::vector<int> y_train(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) y_train[i] = y[train_idx[i]];
    const auto counts = class_counts(y_train, n_classes);
    for (std::size_t c = 0; c < n_classes; ++c)
      if (counts[c] == 0)
        report.warnings.push_back(
            fmt::format("fold {}: class {} absent from training data", fold.name, class_label(c, report.class_names)));
    if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
      throw Error(ErrorKind::SingleClassTraining, fmt::format("fold {} trains on a single class", fold.name));

    const auto train = balance(ds.x.select_rows(train_idx), y_train, n_classes, config.smote_k,
                               derive_seed(config.seed, {kSmoteSeed, f}));
    fold.n_train_balanced = train.y.size();
    const auto model =
        forest::train(train.x, train.y, report.class_names, config.forest, derive_seed(config.seed, {kForestSeed, f}));
    const auto& imp = forest::importances(model);
    for (std::size_t j = 0; j < imp.size(); ++j) importance_sum[j] += imp[j];

    const auto pred = forest::predict_all(model, ds.x.select_rows(test_idx));
    std::vector<int> truth(test_idx.size());
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      truth[i] = y[test_idx[i]];
      predicted[test_idx[i]] = pred[i];
    }
    fold.confusion = evaluate::confusion(truth, pred, report.class_names);
    fold.accuracy = evaluate::class_metrics(fold.confusion).accuracy;
    fold.kappa = evaluate::cohens_kappa(fold.confusion);
  }

  report.pooled = evaluate::confusion(y, predicted, report.class_names);
  report.metrics = evaluate::class_metrics(report.pooled);
  report.kappa = evaluate::cohens_kappa(report.pooled);
  const auto counts = class_counts(y, n_classes);
  report.majority_rate =
      static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(y.size());
  report.importances.resize(importance_sum.size());
  for (std::size_t j = 0; j < importance_sum.size(); ++j)
    report.importances[j] = importance_sum[j] / static_cast<double>(plan.n_folds);

  if (config.task == Task::Binary) {
    std::vector<std::string> participants(ds.participant_id);
    std::sort(participants.begin(), participants.end());
    participants.erase(std::unique(participants.begin(), participants.end()), participants.end());
    // Positive class is ASLEEP; specificity is therefore the Awake recall.
    report.participants = evaluate::per_participant(participants, ds.participant_id, y, predicted, 1);
    for (const auto& w : report.participants->warnings) report.warnings.push_back(w);
  }
  return report;
}

forest::ForestModel train_final(const dataset::FeatureTable& table, const CvConfig& config) {
  if (table.rows.empty()) throw Error(ErrorKind::EmptyEvaluation, "feature matrix has no rows");
  const auto ds = build_dataset(table, config);
  const auto y = ds.classes(config.task);
  const auto names = class_names(config.task);
  require_all_classes(y, names);
  const auto train = balance(ds.x, y, names.size(), config.smote_k, derive_seed(config.seed, {kFinalSeed, kSmoteSeed}));
  auto model = forest::train(train.x, train.y, names, config.forest, derive_seed(config.seed, {kFinalSeed, kForestSeed}));
  model.feature_names = dataset::feature_names(ds.window_before, ds.window_after);
  model.metadata["task"] = std::string(to_string(config.task));
  model.metadata["cv"] = std::string(dataset::to_string(config.cv));
  model.metadata["window_before"] = std::to_string(ds.window_before);
  model.metadata["window_after"] = std::to_string(ds.window_after);
  return model;
}

std::string report_json(const CvReport& r) {
  ordered_json doc;
  doc["task"] = std::string(to_string(r.config.task));
  doc["cv"] = std::string(dataset::to_string(r.config.cv));
  doc["seed"] = r.config.seed;
  doc["windowed"] = r.config.windowed();
  doc["window_before"] = r.config.windowed() ? r.config.window_before : 0;
  doc["window_after"] = r.config.windowed() ? r.config.window_after : 0;
  doc["classes"] = r.class_names;

  ordered_json folds = ordered_json::array();
  for (const auto& f : r.folds) {
    ordered_json jf;
    jf["name"] = f.name;
    jf["n_train"] = f.n_train;
    jf["n_train_balanced"] = f.n_train_balanced;
    jf["n_test"] = f.n_test;
    jf["accuracy"] = f.accuracy;
    jf["kappa"] = optional_json(f.kappa);
    jf["confusion"] = confusion_json(f.confusion);
    folds.push_back(std::move(jf));
  }
  doc["folds"] = std::move(folds);

  ordered_json agg;
  agg["n"] = r.pooled.total();
  agg["accuracy"] = r.metrics.accuracy;
  agg["kappa"] = r.kappa;
  agg["majority_rate"] = r.majority_rate;
  ordered_json per_class = ordered_json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    ordered_json jc;
    jc["class"] = r.class_names[c];
    jc["sensitivity"] = optional_json(r.metrics.per_class[c].sensitivity);
    jc["specificity"] = optional_json(r.metrics.per_class[c].specificity);
    per_class.push_back(std::move(jc));
  }
  agg["per_class"] = std::move(per_class);
  agg["confusion"] = confusion_json(r.pooled);
  doc["aggregate"] = std::move(agg);

  if (r.participants) {
    ordered_json rows = ordered_json::array();
    for (const auto& p : r.participants->rows) {
      ordered_json jp;
      jp["participant"] = p.participant_id;
      jp["n"] = p.n;
      jp["accuracy"] = p.accuracy;
      jp["sensitivity"] = optional_json(p.sensitivity);
      jp["specificity"] = optional_json(p.specificity);
      jp["f1"] = optional_json(p.f1);
      rows.push_back(std::move(jp));
    }
    doc["participants"] = std::move(rows);
    if (!r.participants->rows.empty()) doc["participant_weighted_accuracy"] = evaluate::weighted_accuracy(r.participants->rows);
  }

  ordered_json imp = ordered_json::array();
  for (std::size_t j = 0; j < r.importances.size(); ++j) imp.push_back({{"feature", r.feature_names[j]}, {"importance", r.importances[j]}});
  doc["importances"] = std::move(imp);
  doc["warnings"] = r.warnings;
  return doc.dump(2) + "\n";
}

std::string importances_csv(const std::vector<std::string>& names, const std::vector<double>& values) {
  if (names.size() != values.size()) throw Error(ErrorKind::ShapeError, "feature names and importances differ in length");
  std::vector<std::size_t> order(names.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::string out = "rank,feature,importance\n";
  for (std::size_t r = 0; r < order.size(); ++r) out += fmt::format("{},{},{}\n", r + 1, names[order[r]], values[order[r]]);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t metadata_size(const forest::ForestModel& model, const std::string& key) {
  auto it = model.metadata.find(key);
  if (it == model.metadata.end()) return 0;
  try {
    return static_cast<std::size_t>(std::stoul(it->second));
  } catch (const std::exception&) {
    throw Error(ErrorKind::ModelFormatError, fmt::format("model metadata `{}` is not a count", key));
  }
}

}  // namespace

std::vector<evaluate::AsleepEpoch> predict_asleep(const forest::ForestModel& model, const dataset::FeatureTable& rows) {
  if (rows.rows.empty()) return {};
  const std::size_t before = metadata_size(model, "window_before");
  const std::size_t after = metadata_size(model, "window_after");
  const auto ds = (before + after) > 0 ? dataset::window(rows, before, after) : dataset::unwindowed(rows);
  if (ds.x.cols() != model.n_features)
    throw Error(ErrorKind::ShapeError,
                fmt::format("model expects {} features, input has {}", model.n_features, ds.x.cols()));
  const auto pred = forest::predict_all(model, ds.x);

  std::vector<evaluate::AsleepEpoch> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& name = model.class_names[static_cast<std::size_t>(pred[i])];
    out[i] = {ds.start_ms[i], name != to_string(SleepStage::Awake)};
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start_ms < b.start_ms; });
  return out;
}

std::string spectrogram_csv(const std::vector<signal::Epoch>& epochs) {
  std::string out = "epoch_start_ms,stage";
  std::vector<std::size_t> bins;
  bool header_done = false;
  std::string body;
  for (const auto& e : epochs) {
    const auto psd = features::welch_psd(e.samples);
    if (!header_done) {
      for (std::size_t k = 0; k < psd.freq_hz.size(); ++k)
        if (psd.freq_hz[k] >= 0.5 && psd.freq_hz[k] < 30.0) {
          bins.push_back(k);
          out += fmt::format(",{}", psd.freq_hz[k]);
        }
      header_done = true;
    }
    body += fmt::format("{},{}", e.start_ms, to_string(e.label));
    for (auto k : bins) body += fmt::format(",{}", psd.power[k]);
    body += "\n";
  }
  return out + "\n" + body;
}

}  // namespace earsleep::pipeline
