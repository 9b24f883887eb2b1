#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = earsleep::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

// Three participants, one 30-minute night each, processed once.
const fs::path& workspace() {
  static const fs::path dir = [] {
    const auto d = testing::scratch_dir("cli");
    const auto s = run({"synth", "--out", (d / "cohort").string(), "--participants", "3", "--nights", "one",
                        "--duration-min", "30", "--seed", "5"});
    REQUIRE(s.code == 0);
    const auto p = run({"process", "--manifest", (d / "cohort" / "manifest.csv").string(), "--out",
                        (d / "features").string()});
    REQUIRE(p.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("synth writes a manifest with relative paths and a resolved config") {
  const auto& d = workspace();
  const auto manifest = slurp(d / "cohort" / "manifest.csv");
  CHECK(manifest.rfind("recording_id,participant_id,night_index,recording,hypnogram,onset_ms\n", 0) == 0);
  CHECK(lines(manifest) == 4);
  CHECK(manifest.find("P02_N1,P02,1,recordings/P02_N1.csv,hypnograms/P02_N1.csv,") != std::string::npos);
  CHECK(fs::exists(d / "cohort" / "recordings" / "P03_N1.csv"));
  const auto cfg = slurp(d / "cohort" / earsleep::cli::kResolvedConfigFile);
  CHECK(cfg.find("seed=5\n") != std::string::npos);
  CHECK(cfg.find("duration-min=30\n") != std::string::npos);
  CHECK(cfg.find("profile=default\n") != std::string::npos);
}

TEST_CASE("process writes the feature matrix and a rejection summary") {
  const auto& d = workspace();
  const auto features = slurp(d / "features" / "features.csv");
  CHECK(features.rfind("std,variance,", 0) == 0);
  const auto rejection = slurp(d / "features" / "rejection.csv");
  CHECK(rejection.rfind("recording_id,clean,amplitude_exceeded,low_variance,degenerate\n", 0) == 0);
  CHECK(lines(rejection) == 4);

  // Re-running on the same inputs reproduces the matrix byte for byte.
  const auto again = run({"process", "--manifest", (d / "cohort" / "manifest.csv").string(), "--out",
                          (d / "features2").string(), "--threads", "2"});
  REQUIRE(again.code == 0);
  CHECK(again.out.find("total: 180 epochs, clean=") != std::string::npos);
  CHECK(slurp(d / "features2" / "features.csv") == features);
}

TEST_CASE("a single recording can be processed without a manifest") {
  const auto& d = workspace();
  const auto r = run({"process", "--recording", (d / "cohort" / "recordings" / "P01_N1.csv").string(), "--hypnogram",
                      (d / "cohort" / "hypnograms" / "P01_N1.csv").string(), "--participant", "P01", "--out",
                      (d / "single").string()});
  REQUIRE(r.code == 0);
  const auto text = slurp(d / "single" / "features.csv");
  CHECK(text.find(",P01,P01_N1,") != std::string::npos);
}

TEST_CASE("malformed inputs exit with code 2") {
  const auto& d = workspace();
  write(d / "empty.csv", "");
  auto r = run({"process", "--recording", (d / "empty.csv").string(), "--hypnogram",
                (d / "cohort" / "hypnograms" / "P01_N1.csv").string(), "--participant", "P01", "--out",
                (d / "bad").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("ParseError") != std::string::npos);

  r = run({"process", "--manifest", (d / "missing.csv").string(), "--out", (d / "bad").string()});
  CHECK(r.code == 2);
  r = run({"train-eval", "--features", (d / "empty.csv").string(), "--out", (d / "bad").string()});
  CHECK(r.code == 2);
  r = run({"train-eval", "--out", (d / "bad").string()});  // --features is required
  CHECK(r.code == 2);
  r = run({"bogus"});
  CHECK(r.code == 2);
  r = run({"train-eval", "--features", (d / "features" / "features.csv").string(), "--out", (d / "bad").string(),
           "--task", "sixstage"});
  CHECK(r.code == 2);
}

TEST_CASE("help exits cleanly") {
  const auto r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("train-eval") != std::string::npos);

  const auto sub = run({"importances", "--help"});
  CHECK(sub.code == 0);
  const auto first = sub.out.find("--top");
  REQUIRE(first != std::string::npos);
  CHECK(sub.out.find("--top", first + 1) == std::string::npos);
}

TEST_CASE("config files are overridden by flags and unknown keys are rejected") {
  const auto& d = workspace();
  write(d / "te.conf", "# quick run\ntask = multistage\ncv=stratified10\ntrees=3\nsmote_k = 2\nfolds=3\n");
  const auto r = run({"train-eval", "--config", (d / "te.conf").string(), "--features",
                      (d / "features" / "features.csv").string(), "--out", (d / "te_conf").string(), "--trees", "4"});
  REQUIRE(r.code == 0);
  const auto cfg = slurp(d / "te_conf" / earsleep::cli::kResolvedConfigFile);
  CHECK(cfg.find("trees=4\n") != std::string::npos);
  CHECK(cfg.find("task=multistage\n") != std::string::npos);
  CHECK(cfg.find("smote-k=2\n") != std::string::npos);
  CHECK(cfg.find("folds=3\n") != std::string::npos);
  CHECK(cfg.find("seed=42\n") != std::string::npos);
  CHECK(cfg.find("window-stratified=false\n") != std::string::npos);
  CHECK(slurp(d / "te_conf" / "report.json").find("\"task\": \"multistage\"") != std::string::npos);

  write(d / "bad.conf", "trees=3\nlearning_rate=0.1\n");
  const auto bad = run({"train-eval", "--config", (d / "bad.conf").string(), "--features",
                        (d / "features" / "features.csv").string(), "--out", (d / "te_bad").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("learning-rate") != std::string::npos);
  write(d / "noeq.conf", "trees 3\n");
  CHECK(run({"train-eval", "--config", (d / "noeq.conf").string(), "--features",
             (d / "features" / "features.csv").string(), "--out", (d / "te_bad").string()})
            .code == 2);
}

TEST_CASE("train-eval writes reports, model and splits deterministically") {
  const auto& d = workspace();
  auto train = [&](const std::string& out) {
    return run({"train-eval", "--features", (d / "features" / "features.csv").string(), "--out", (d / out).string(),
                "--task", "binary", "--cv", "lopo", "--trees", "10"});
  };
  const auto a = train("te_a");
  REQUIRE(a.code == 0);
  CHECK(a.out.find("binary lopo (") != std::string::npos);
  CHECK(a.out.find("AWAKE: sensitivity=") != std::string::npos);
  for (const char* f : {"report.json", "confusion.csv", "confusion_folds.csv", "importances.csv", "splits.csv",
                        "model.json", "run_config.txt"})
    CHECK(fs::exists(d / "te_a" / f));
  CHECK(slurp(d / "te_a" / "confusion.csv").rfind("true\\pred,AWAKE,ASLEEP\n", 0) == 0);
  CHECK(slurp(d / "te_a" / "importances.csv").rfind("rank,feature,importance\n1,", 0) == 0);

  REQUIRE(train("te_b").code == 0);
  for (const char* f : {"report.json", "model.json", "splits.csv", "importances.csv"})
    CHECK(slurp(d / "te_a" / f) == slurp(d / "te_b" / f));
}

TEST_CASE("a class missing from the cohort is infeasible and named") {
  const auto& d = workspace();
  std::istringstream in(slurp(d / "features" / "features.csv"));
  std::string line, kept;
  while (std::getline(in, line))
    if (line.find(",REM,") == std::string::npos) kept += line + "\n";
  write(d / "no_rem.csv", kept);
  const auto r = run({"train-eval", "--features", (d / "no_rem.csv").string(), "--out", (d / "te_norem").string(),
                      "--task", "multistage", "--trees", "3"});
  CHECK(r.code == 3);
  CHECK(r.err.find("SplitInfeasible") != std::string::npos);
  CHECK(r.err.find("REM") != std::string::npos);
}

TEST_CASE("onset, spectrogram and importances subcommands") {
  const auto& d = workspace();
  REQUIRE(run({"train-eval", "--features", (d / "features" / "features.csv").string(), "--out",
               (d / "te_onset").string(), "--trees", "10"})
              .code == 0);
  const auto model = (d / "te_onset" / "model.json").string();

  const auto onset = run({"onset", "--model", model, "--manifest", (d / "cohort" / "manifest.csv").string(), "--out",
                          (d / "onset").string()});
  REQUIRE(onset.code == 0);
  CHECK(onset.out.find("mean absolute delay:") != std::string::npos);
  const auto csv = slurp(d / "onset" / "onset.csv");
  CHECK(csv.rfind("recording_id,predicted_onset_ms,reference_onset_ms,delay_min\n", 0) == 0);

  const auto spec = run({"spectrogram", "--recording", (d / "cohort" / "recordings" / "P01_N1.csv").string(),
                         "--hypnogram", (d / "cohort" / "hypnograms" / "P01_N1.csv").string(), "--out",
                         (d / "spec").string()});
  REQUIRE(spec.code == 0);
  CHECK(lines(slurp(d / "spec" / "spectrogram.csv")) == 1 + 60);

  const auto imp = run({"importances", "--model", model, "--top", "5", "--out", (d / "imp").string()});
  REQUIRE(imp.code == 0);
  CHECK(lines(slurp(d / "imp" / "importances.csv")) == 1 + 130);

  write(d / "broken_model.json", "{\"format\":\"earsleep.forest\",\"version\":99}");
  CHECK(run({"importances", "--model", (d / "broken_model.json").string(), "--out", (d / "imp2").string()}).code == 2);
}
