#include "cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>

#include "earsleep/dataset.hpp"
#include "earsleep/error.hpp"
#include "earsleep/evaluate.hpp"
#include "earsleep/forest.hpp"
#include "earsleep/pipeline.hpp"
#include "earsleep/signal.hpp"
#include "earsleep/synth.hpp"
#include "text_io.hpp"

namespace earsleep::cli {

namespace fs = std::filesystem;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidCutoff:
    case ErrorKind::EmptyRecording:
    case ErrorKind::NonFiniteSample:
    case ErrorKind::NoOverlap:
    case ErrorKind::ModelFormatError:
    case ErrorKind::ShapeError:
      return kInputError;
    case ErrorKind::SplitInfeasible:
    case ErrorKind::SmoteInfeasible:
    case ErrorKind::SingleClassTraining:
    case ErrorKind::OnsetUndefined:
    case ErrorKind::EmptyEvaluation:
      return kInfeasible;
    default:
      return kInternalError;
  }
}

std::string remediation(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SplitInfeasible:
      return "hint: use more recordings, fewer folds, or task=binary";
    case ErrorKind::SingleClassTraining:
      return "hint: the held-out split left a single class for training; add participants";
    default:
      return {};
  }
}

// ---------------------------------------------------------------------------
// Manifest of recording/hypnogram pairs.

struct ManifestEntry {
  std::string recording_id;
  std::string participant_id;
  int night_index = 1;
  std::string recording;
  std::string hypnogram;
};

constexpr std::string_view kManifestHeader = "recording_id,participant_id,night_index,recording,hypnogram,onset_ms";

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  const auto text = io::read_file(path);
  const fs::path base = fs::path(path).parent_path();
  io::LineReader reader(text);
  std::string_view line;
  if (!reader.next(line) || line != kManifestHeader)
    throw Error(ErrorKind::ParseError, fmt::format("{}: line 1: expected header `{}`", path, kManifestHeader));
  std::vector<ManifestEntry> out;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != 6)
      throw Error(ErrorKind::ParseError, fmt::format("{}: line {}: expected 6 fields", path, reader.line_number()));
    ManifestEntry e;
    e.recording_id = f[0];
    e.participant_id = f[1];
    e.night_index = static_cast<int>(io::parse_int(f[2], reader.line_number()));
    e.recording = (base / fs::path(f[3])).string();
    e.hypnogram = (base / fs::path(f[4])).string();
    out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(ErrorKind::ParseError, fmt::format("{}: manifest lists no recordings", path));
  return out;
}

// ---------------------------------------------------------------------------
// Options shared by the commands that run signal processing.

struct InputOptions {
  std::string manifest;
  std::string recording;
  std::string hypnogram;
  std::string participant = "P01";
  std::string recording_id;
};

void add_input_options(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--manifest", in.manifest, "manifest.csv listing recording/hypnogram pairs");
  cmd->add_option("--recording", in.recording, "recording file (timestamp_ms,uV)");
  cmd->add_option("--hypnogram", in.hypnogram, "hypnogram file (start_ms,stage)");
  cmd->add_option("--participant", in.participant, "participant id for --recording");
  cmd->add_option("--recording-id", in.recording_id, "recording id for --recording (default: file stem)");
}

std::vector<ManifestEntry> resolve_inputs(const InputOptions& in) {
  if (!in.manifest.empty()) {
    if (!in.recording.empty() || !in.hypnogram.empty())
      throw Error(ErrorKind::InvalidArgument, "give either --manifest or --recording/--hypnogram, not both");
    return read_manifest(in.manifest);
  }
  if (in.recording.empty() || in.hypnogram.empty())
    throw Error(ErrorKind::InvalidArgument, "--recording and --hypnogram are required without --manifest");
  ManifestEntry e;
  e.recording_id = in.recording_id.empty() ? fs::path(in.recording).stem().string() : in.recording_id;
  e.participant_id = in.participant;
  e.recording = in.recording;
  e.hypnogram = in.hypnogram;
  return {e};
}

struct ProcessOptions {
  std::string phase = "zero";
  double amp_limit = 500.0;
  double var_floor = 1.0;
};

void add_process_options(CLI::App* cmd, ProcessOptions& p) {
  cmd->add_option("--phase", p.phase, "filter phase mode")->check(CLI::IsMember({"zero", "causal"}));
  cmd->add_option("--amp-limit", p.amp_limit, "artifact amplitude limit (uV)");
  cmd->add_option("--var-floor", p.var_floor, "low-variance floor (uV^2)");
}

pipeline::ProcessConfig process_config(const ProcessOptions& p, unsigned threads) {
  pipeline::ProcessConfig c;
  c.phase = p.phase == "causal" ? signal::PhaseMode::Causal : signal::PhaseMode::ZeroPhase;
  c.limits.amp_limit_uv = p.amp_limit;
  c.limits.var_floor_uv2 = p.var_floor;
  c.threads = threads;
  return c;
}

// ---------------------------------------------------------------------------
// Flat key=value config file; keys are option long names ('_' or '-').

std::vector<std::string> config_arguments(const std::string& path, CLI::App* cmd) {
  const auto text = io::read_file(path);
  io::LineReader reader(text);
  std::string_view line;
  std::vector<std::string> out;
  while (reader.next(line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::ParseError, fmt::format("{}: line {}: expected key=value", path, reader.line_number()));
    std::string key(CLI::detail::trim_copy(std::string(line.substr(0, eq))));
    std::string value(CLI::detail::trim_copy(std::string(line.substr(eq + 1))));
    std::replace(key.begin(), key.end(), '_', '-');
    const CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (key == "config" || key == "help" || opt == nullptr)
      throw Error(ErrorKind::ParseError,
                  fmt::format("{}: line {}: unknown key `{}` for `{}`", path, reader.line_number(), key, cmd->get_name()));
    out.push_back(fmt::format("--{}={}", key, value));
  }
  return out;
}

// Effective value: the last occurrence wins, flags print as true/false.
std::string option_value(const CLI::Option* opt) {
  if (opt->get_expected_max() == 0) return opt->count() == 0 ? "false" : (opt->as<bool>() ? "true" : "false");
  if (opt->count() == 0) return opt->get_default_str();
  return opt->results().back();
}

void write_resolved_config(const fs::path& dir, CLI::App* cmd) {
  std::string text = fmt::format("# resolved configuration of `{}`\n", cmd->get_name());
  for (const CLI::Option* opt : cmd->get_options()) {
    const auto name = opt->get_single_name();
    if (name == "help" || name == "config" || name.empty()) continue;
    text += fmt::format("{}={}\n", name, option_value(opt));
  }
  io::write_file((dir / kResolvedConfigFile).string(), text);
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::InvalidArgument, fmt::format("cannot create output directory `{}`", out));
  return dir;
}

std::vector<int> parse_nights(const std::string& text, std::size_t participants) {
  if (text == "study") return synth::study_night_distribution(participants);
  if (text == "one") return std::vector<int>(participants, 1);
  std::vector<int> out;
  for (auto f : io::split(text, ',')) out.push_back(static_cast<int>(io::parse_int(f, 0)));
  return out;
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : "n/a"; }

// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string out;
  std::size_t participants = 11;
  std::string nights = "study";
  double duration_min = 350.0;
  std::uint64_t seed = 1;
  std::string profile = "default";
  std::optional<double> spike_prob;
  double perturb_low = 0.7;
  double perturb_high = 1.3;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  synth::CohortConfig cfg;
  cfg.n_participants = o.participants;
  cfg.nights_per_participant = parse_nights(o.nights, o.participants);
  cfg.duration_min = o.duration_min;
  cfg.seed = o.seed;
  cfg.profiles = o.profile == "null" ? synth::ProfileSet::null_signal() : synth::ProfileSet::defaults();
  if (o.spike_prob) cfg.profiles.set_spike_prob(*o.spike_prob);
  cfg.perturb_low = o.perturb_low;
  cfg.perturb_high = o.perturb_high;
  const auto nights = synth::cohort_nights(cfg);

  const fs::path dir = prepare_out(o.out);
  fs::create_directories(dir / "recordings");
  fs::create_directories(dir / "hypnograms");
  std::string manifest = std::string(kManifestHeader) + "\n";
  std::size_t n_nights = 0, n_epochs = 0;
  for (std::size_t p = 0; p < nights.size(); ++p) {
    for (int k = 1; k <= nights[p]; ++k) {
      const auto night = synth::gen_cohort_night(cfg, p, k);
      const std::string rec = fmt::format("recordings/{}.csv", night.recording_id);
      const std::string hyp = fmt::format("hypnograms/{}.csv", night.recording_id);
      signal::write_recording((dir / rec).string(), night.recording);
      signal::write_hypnogram((dir / hyp).string(), night.hypnogram);
      manifest += fmt::format("{},{},{},{},{},{}\n", night.recording_id, night.participant_id, night.night_index, rec,
                              hyp, night.onset_ms ? fmt::to_string(*night.onset_ms) : std::string());
      ++n_nights;
      n_epochs += night.hypnogram.entries.size();
    }
  }
  io::write_file((dir / "manifest.csv").string(), manifest);
  fmt::print(out, "synth: {} participants, {} nights, {} epochs -> {}\n", nights.size(), n_nights, n_epochs,
             dir.string());
  return kOk;
}

struct ProcessCmdOptions {
  std::string out;
  InputOptions in;
  ProcessOptions proc;
  unsigned threads = 0;
};

int cmd_process(const ProcessCmdOptions& o, std::ostream& out) {
  const auto inputs = resolve_inputs(o.in);
  const auto config = process_config(o.proc, o.threads);
  const fs::path dir = prepare_out(o.out);
  dataset::FeatureTable table;
  std::string rejection = "recording_id,clean,amplitude_exceeded,low_variance,degenerate\n";
  signal::RejectionSummary total;
  std::size_t total_degenerate = 0;
  for (const auto& e : inputs) {
    const auto rec = signal::read_recording(e.recording);
    const auto hyp = signal::read_hypnogram(e.hypnogram);
    const auto processed = pipeline::process_recording(rec, hyp, config);
    pipeline::append_rows(table, processed, e.participant_id, e.recording_id);
    const auto& s = processed.summary;
    rejection += fmt::format("{},{},{},{},{}\n", e.recording_id, s.clean, s.amplitude, s.low_variance,
                             processed.degenerate);
    fmt::print(out, "{}: {} epochs, clean={} amplitude_exceeded={} low_variance={} degenerate={}\n", e.recording_id,
               s.total(), s.clean, s.amplitude, s.low_variance, processed.degenerate);
    total.clean += s.clean;
    total.amplitude += s.amplitude;
    total.low_variance += s.low_variance;
    total_degenerate += processed.degenerate;
  }
  dataset::write_feature_table((dir / "features.csv").string(), table);
  io::write_file((dir / "rejection.csv").string(), rejection);
  const double n = std::max<double>(1.0, static_cast<double>(total.total()));
  fmt::print(out,
             "total: {} epochs, clean={} ({:.1f}%) amplitude_exceeded={} ({:.1f}%) low_variance={} ({:.1f}%) "
             "degenerate={}; {} feature rows\n",
             total.total(), total.clean, 100.0 * static_cast<double>(total.clean) / n, total.amplitude,
             100.0 * static_cast<double>(total.amplitude) / n, total.low_variance,
             100.0 * static_cast<double>(total.low_variance) / n, total_degenerate, table.rows.size());
  return kOk;
}

struct TrainEvalOptions {
  std::string out;
  std::string features;
  std::string task = "binary";
  std::string cv = "lopo";
  std::uint64_t seed = 42;
  std::size_t trees = 100;
  std::size_t max_features = 0;
  std::size_t min_samples_leaf = 1;
  std::size_t max_depth = 0;
  std::size_t smote_k = 5;
  std::size_t window_before = 2;
  std::size_t window_after = 2;
  bool window_stratified = false;
  std::size_t folds = 10;
  unsigned threads = 0;
};

int cmd_train_eval(const TrainEvalOptions& o, std::ostream& out) {
  const auto table = dataset::read_feature_table(o.features);
  pipeline::CvConfig cfg;
  cfg.task = *parse_task(o.task);
  cfg.cv = o.cv == "lopo" ? dataset::CvVariant::LeaveOneParticipantOut : dataset::CvVariant::StratifiedKFold;
  cfg.seed = o.seed;
  cfg.forest.n_trees = o.trees;
  cfg.forest.max_features = o.max_features;
  cfg.forest.min_samples_leaf = o.min_samples_leaf;
  cfg.forest.max_depth = o.max_depth;
  cfg.forest.threads = o.threads;
  cfg.smote_k = o.smote_k;
  cfg.window_before = o.window_before;
  cfg.window_after = o.window_after;
  cfg.window_stratified = o.window_stratified;
  cfg.folds = o.folds;

  const auto report = pipeline::cross_validate(table, cfg);
  const auto model = pipeline::train_final(table, cfg);

  const fs::path dir = prepare_out(o.out);
  io::write_file((dir / "report.json").string(), pipeline::report_json(report));
  io::write_file((dir / "confusion.csv").string(), evaluate::format_confusion(report.pooled));
  std::string per_fold;
  for (const auto& f : report.folds) per_fold += "# " + f.name + "\n" + evaluate::format_confusion(f.confusion);
  io::write_file((dir / "confusion_folds.csv").string(), per_fold);
  io::write_file((dir / "importances.csv").string(), pipeline::importances_csv(report.feature_names, report.importances));
  io::write_file((dir / "splits.csv").string(), dataset::format_split_plan(report.plan));
  forest::save((dir / "model.json").string(), model);

  fmt::print(out, "{} {} ({} samples, {} folds): accuracy={:.4f} kappa={:.4f} majority_rate={:.4f}\n", o.task,
             dataset::to_string(cfg.cv), report.pooled.total(), report.folds.size(), report.metrics.accuracy,
             report.kappa, report.majority_rate);
  for (std::size_t c = 0; c < report.class_names.size(); ++c)
    fmt::print(out, "  {}: sensitivity={} specificity={}\n", report.class_names[c],
               fmt_optional(report.metrics.per_class[c].sensitivity),
               fmt_optional(report.metrics.per_class[c].specificity));
  for (const auto& w : report.warnings) fmt::print(out, "warning: {}\n", w);
  return kOk;
}

struct OnsetOptions {
  std::string out;
  std::string model;
  InputOptions in;
  ProcessOptions proc;
  unsigned threads = 0;
};

int cmd_onset(const OnsetOptions& o, std::ostream& out, std::ostream& err) {
  const auto model = forest::load(o.model);
  const auto inputs = resolve_inputs(o.in);
  const auto config = process_config(o.proc, o.threads);
  std::vector<evaluate::OnsetComparison> rows;
  for (const auto& e : inputs) {
    const auto hyp = signal::read_hypnogram(e.hypnogram);
    const auto processed = pipeline::process_recording(signal::read_recording(e.recording), hyp, config);
    dataset::FeatureTable table;
    pipeline::append_rows(table, processed, e.participant_id, e.recording_id);
    const auto predicted = pipeline::predict_asleep(model, table);
    try {
      auto row = evaluate::onset_delay(predicted, evaluate::asleep_sequence(hyp));
      row.recording_id = e.recording_id;
      rows.push_back(row);
    } catch (const Error& ex) {
      if (ex.kind() != ErrorKind::OnsetUndefined) throw;
      fmt::print(err, "warning: {}: {}; skipped\n", e.recording_id, ex.what());
    }
  }
  if (rows.empty()) throw Error(ErrorKind::OnsetUndefined, "no recording has a defined onset on both sides");

  std::string csv = "recording_id,predicted_onset_ms,reference_onset_ms,delay_min\n";
  for (const auto& r : rows) {
    csv += fmt::format("{},{},{},{}\n", r.recording_id, r.predicted_ms, r.reference_ms, r.delay_min);
    fmt::print(out, "{}: delay {:+.1f} min\n", r.recording_id, r.delay_min);
  }
  const fs::path dir = prepare_out(o.out);
  io::write_file((dir / "onset.csv").string(), csv);
  fmt::print(out, "mean absolute delay: {:.2f} min over {} recordings\n", evaluate::mean_absolute_delay(rows),
             rows.size());
  return kOk;
}

struct SpectrogramOptions {
  std::string out;
  std::string recording;
  std::string hypnogram;
  ProcessOptions proc;
};

int cmd_spectrogram(const SpectrogramOptions& o, std::ostream& out) {
  const auto epochs = pipeline::condition_and_segment(signal::read_recording(o.recording),
                                                      signal::read_hypnogram(o.hypnogram), process_config(o.proc, 0));
  const fs::path dir = prepare_out(o.out);
  io::write_file((dir / "spectrogram.csv").string(), pipeline::spectrogram_csv(epochs));
  fmt::print(out, "spectrogram: {} epochs\n", epochs.size());
  return kOk;
}

struct ImportancesOptions {
  std::string out;
  std::string model;
  std::size_t top = 10;
};

int cmd_importances(const ImportancesOptions& o, std::ostream& out) {
  const auto model = forest::load(o.model);
  const auto csv = pipeline::importances_csv(model.feature_names, forest::importances(model));
  const fs::path dir = prepare_out(o.out);
  io::write_file((dir / "importances.csv").string(), csv);
  io::LineReader reader(csv);
  std::string_view line;
  reader.next(line);
  for (std::size_t i = 0; i < o.top && reader.next(line);) {
    if (line.empty()) continue;
    fmt::print(out, "{}\n", line);
    ++i;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-channel sleep staging: synthesis, processing, training and evaluation"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  std::string config_path;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value file; command-line flags take precedence");
  };

  SynthOptions synth_o;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort");
  add_config(synth_cmd);
  synth_cmd->add_option("--out", synth_o.out, "output directory")->required();
  synth_cmd->add_option("--participants", synth_o.participants)->check(CLI::Range(2, 1000));
  synth_cmd->add_option("--nights", synth_o.nights, "study | one | comma-separated nights per participant");
  synth_cmd->add_option("--duration-min", synth_o.duration_min, "minutes per night");
  synth_cmd->add_option("--seed", synth_o.seed);
  synth_cmd->add_option("--profile", synth_o.profile)->check(CLI::IsMember({"default", "null"}));
  synth_cmd->add_option("--spike-prob", synth_o.spike_prob, "override the per-epoch artifact probability");
  synth_cmd->add_option("--perturb-low", synth_o.perturb_low);
  synth_cmd->add_option("--perturb-high", synth_o.perturb_high);

  ProcessCmdOptions proc_o;
  auto* proc_cmd = app.add_subcommand("process", "recordings + hypnograms -> feature matrix");
  add_config(proc_cmd);
  proc_cmd->add_option("--out", proc_o.out, "output directory")->required();
  add_input_options(proc_cmd, proc_o.in);
  add_process_options(proc_cmd, proc_o.proc);
  proc_cmd->add_option("--threads", proc_o.threads, "0 = all cores");

  TrainEvalOptions te_o;
  auto* te_cmd = app.add_subcommand("train-eval", "cross-validate and train a final model");
  add_config(te_cmd);
  te_cmd->add_option("--out", te_o.out, "output directory")->required();
  te_cmd->add_option("--features", te_o.features, "feature matrix")->required();
  te_cmd->add_option("--task", te_o.task)->check(CLI::IsMember({"binary", "multistage"}));
  te_cmd->add_option("--cv", te_o.cv)->check(CLI::IsMember({"lopo", "stratified10"}));
  te_cmd->add_option("--seed", te_o.seed);
  te_cmd->add_option("--trees", te_o.trees)->check(CLI::PositiveNumber);
  te_cmd->add_option("--max-features", te_o.max_features, "0 = ceil(sqrt(d))");
  te_cmd->add_option("--min-samples-leaf", te_o.min_samples_leaf)->check(CLI::PositiveNumber);
  te_cmd->add_option("--max-depth", te_o.max_depth, "0 = unlimited");
  te_cmd->add_option("--smote-k", te_o.smote_k)->check(CLI::PositiveNumber);
  te_cmd->add_option("--window-before", te_o.window_before);
  te_cmd->add_option("--window-after", te_o.window_after);
  te_cmd->add_flag("--window-stratified", te_o.window_stratified,
                   "also window under stratified CV (leaks neighbouring epochs; diagnostic only)");
  te_cmd->add_option("--folds", te_o.folds, "folds for stratified CV")->check(CLI::Range(2, 1000));
  te_cmd->add_option("--threads", te_o.threads, "0 = all cores");

  OnsetOptions onset_o;
  auto* onset_cmd = app.add_subcommand("onset", "predicted vs reference sleep onset");
  add_config(onset_cmd);
  onset_cmd->add_option("--out", onset_o.out, "output directory")->required();
  onset_cmd->add_option("--model", onset_o.model, "model.json from train-eval")->required();
  add_input_options(onset_cmd, onset_o.in);
  add_process_options(onset_cmd, onset_o.proc);
  onset_cmd->add_option("--threads", onset_o.threads, "0 = all cores");

  SpectrogramOptions spec_o;
  auto* spec_cmd = app.add_subcommand("spectrogram", "per-epoch power spectra for plotting");
  add_config(spec_cmd);
  spec_cmd->add_option("--out", spec_o.out, "output directory")->required();
  spec_cmd->add_option("--recording", spec_o.recording)->required();
  spec_cmd->add_option("--hypnogram", spec_o.hypnogram)->required();
  add_process_options(spec_cmd, spec_o.proc);

  ImportancesOptions imp_o;
  auto* imp_cmd = app.add_subcommand("importances", "ranked feature importances of a model");
  add_config(imp_cmd);
  imp_cmd->add_option("--out", imp_o.out, "output directory")->required();
  imp_cmd->add_option("--model", imp_o.model)->required();
  imp_cmd->add_option("--top", imp_o.top, "rows to print");

  try {
    // Config-file values are inserted ahead of the command-line flags; with
    // take-last semantics the flags win.
    std::vector<std::string> argv = args;
    if (!argv.empty()) {
      if (CLI::App* cmd = app.get_subcommand_no_throw(argv[0])) {
        std::string path;
        for (std::size_t i = 1; i < argv.size(); ++i) {
          if (argv[i] == "--config" && i + 1 < argv.size()) path = argv[i + 1];
          else if (argv[i].rfind("--config=", 0) == 0) path = argv[i].substr(9);
        }
        if (!path.empty()) {
          auto extra = config_arguments(path, cmd);
          argv.insert(argv.begin() + 1, extra.begin(), extra.end());
        }
      }
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // help() of the root already descends into the selected subcommand.
      out << app.help();
      return kOk;
    }
    fmt::print(err, "error: {}\n", e.what());
    return kInputError;
  } catch (const Error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_code(e.kind());
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    int rc = kOk;
    std::string out_dir;
    if (cmd == synth_cmd) {
      rc = cmd_synth(synth_o, out);
      out_dir = synth_o.out;
    } else if (cmd == proc_cmd) {
      rc = cmd_process(proc_o, out);
      out_dir = proc_o.out;
    } else if (cmd == te_cmd) {
      rc = cmd_train_eval(te_o, out);
      out_dir = te_o.out;
    } else if (cmd == onset_cmd) {
      rc = cmd_onset(onset_o, out, err);
      out_dir = onset_o.out;
    } else if (cmd == spec_cmd) {
      rc = cmd_spectrogram(spec_o, out);
      out_dir = spec_o.out;
    } else {
      rc = cmd_importances(imp_o, out);
      out_dir = imp_o.out;
    }
    write_resolved_config(prepare_out(out_dir), cmd);
    return rc;
  } catch (const Error& e) {
    fmt::print(err, "error [{}]: {}\n", to_string(e.kind()), e.what());
    if (auto hint = remediation(e.kind()); !hint.empty()) fmt::print(err, "{}\n", hint);
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    fmt::print(err, "internal error: {}\n", e.what());
    return kInternalError;
  }
}

}  // namespace earsleep::cli
