#include "earsleep/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "earsleep/error.hpp"
#include "earsleep/evaluate.hpp"
#include "earsleep/features.hpp"
#include "earsleep/parallel.hpp"
#include "earsleep/random.hpp"

namespace earsleep::synth {

ProfileSet ProfileSet::defaults() {
  ProfileSet p;
  //                          delta theta alpha beta   noise  spikes
  p[SleepStage::Awake] = {{11.0, 8.0, 12.0, 9.0}, 3.0, 0.02};
  p[SleepStage::Core] = {{20.0, 10.0, 6.0, 5.0}, 3.0, 0.005};
  p[SleepStage::Deep] = {{32.0, 9.0, 4.0, 3.0}, 3.0, 0.005};
  p[SleepStage::REM] = {{13.0, 11.0, 6.0, 6.0}, 3.0, 0.005};
  p.epoch_jitter = 0.1;
  p.drift_sd = 0.3;
  return p;
}

ProfileSet ProfileSet::null_signal() {
  ProfileSet p;
  for (auto s : kAllStages) p[s] = {{15.0, 9.0, 8.0, 6.0}, 3.0, 0.0};
  p.epoch_jitter = 0.05;
  p.drift_sd = 0.4;
  p.drift_corr = 0.99;
  return p;
}

void ProfileSet::set_spike_prob(double prob) {
  for (auto& s : stage) s.spike_prob = prob;
}

// ---------------------------------------------------------------------------

std::vector<SleepStage> markov_stages(std::size_t n_epochs, std::uint64_t seed) {
  // Mean dwell (epochs) and exit probabilities, rows indexed by SleepStage.
  constexpr std::array<double, 4> dwell = {20.0, 30.0, 40.0, 24.0};
  constexpr std::array<std::array<double, 4>, 4> exit = {{
      {0.00, 0.90, 0.05, 0.05},  // Awake -> Core mostly
      {0.20, 0.00, 0.45, 0.35},  // Core
      {0.05, 0.85, 0.00, 0.10},  // Deep
      {0.40, 0.60, 0.00, 0.00},  // REM
  }};

  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SleepStage> out(n_epochs);
  auto s = SleepStage::Awake;
  for (std::size_t e = 0; e < n_epochs; ++e) {
    out[e] = s;
    const auto i = static_cast<std::size_t>(s);
    if (u(rng) < 1.0 / dwell[i]) {
      double r = u(rng), acc = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        acc += exit[i][j];
        if (r < acc) {
          s = static_cast<SleepStage>(j);
          break;
        }
      }
    }
  }
  return out;
}

namespace {

enum Stream : std::uint64_t { kStages = 1, kBandNoise, kWeights, kBroadband, kSpikes, kTimestamps };

// Unit-variance noise band-limited to [low, high) Hz on the 250 Hz grid.
std::vector<double> band_noise(std::size_t n, double low, double high, Rng& rng) {
  constexpr std::size_t warmup = 2500;
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> white(n + warmup);
  for (double& v : white) v = z(rng);
  signal::FilterSpec spec;
  spec.order = 2;
  spec.low_cut_hz = low;
  spec.high_cut_hz = high;
  spec.phase_mode = signal::PhaseMode::Causal;
  auto y = signal::apply_filter(white, spec);
  y.erase(y.begin(), y.begin() + warmup);
  double ss = 0.0;
  for (double v : y) ss += v * v;
  const double scale = 1.0 / std::sqrt(ss / static_cast<double>(n));
  for (double& v : y) v *= scale;
  return y;
}

}  // namespace

SyntheticNight gen_night(double duration_min, const ProfileSet& profiles, std::uint64_t seed,
                         const NightOptions& options) {
  if (!(duration_min >= 10.0)) throw Error(ErrorKind::InvalidArgument, "synthetic nights must last at least 10 minutes");

  const auto n_epochs = static_cast<std::size_t>(std::floor(duration_min * 2.0));
  const auto stages = markov_stages(n_epochs, derive_seed(seed, {kStages}));

  SyntheticNight night;
  night.participant_id = options.participant_id;
  night.night_index = options.night_index;
  night.recording_id = fmt::format("{}_N{}", options.participant_id, options.night_index);
  for (std::size_t e = 0; e < n_epochs; ++e)
    night.hypnogram.entries.push_back(
        {options.start_ms + static_cast<std::int64_t>(e) * signal::kEpochMs, stages[e]});
  night.onset_ms = evaluate::sleep_onset(night.hypnogram);

  // Uniform 250 Hz grid covering the hypnogram plus a margin on both sides.
  const double step_ms = 1000.0 / signal::kTargetRate;
  const auto pad = static_cast<std::size_t>(std::llround(options.pad_s * signal::kTargetRate));
  const std::size_t n = n_epochs * signal::kEpochSamples + 2 * pad;
  const double grid_start = static_cast<double>(options.start_ms) - static_cast<double>(pad) * step_ms;
  auto epoch_of = [&](std::size_t k) {
    const auto rel = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad);
    return static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(rel / static_cast<std::ptrdiff_t>(signal::kEpochSamples), 0,
                                   static_cast<std::ptrdiff_t>(n_epochs) - 1));
  };

  // Per-epoch band weights: stage profile x log-normal jitter x slow AR(1) drift.
  std::vector<std::array<double, 4>> weight(n_epochs);
  {
    Rng rng(derive_seed(seed, {kWeights}));
    std::normal_distribution<double> z(0.0, 1.0);
    std::array<double, 4> drift{};
    for (auto& d : drift) d = profiles.drift_sd * z(rng);
    const double innov = profiles.drift_sd * std::sqrt(1.0 - profiles.drift_corr * profiles.drift_corr);
    const double js = profiles.epoch_jitter;
    for (std::size_t e = 0; e < n_epochs; ++e) {
      for (std::size_t b = 0; b < 4; ++b) {
        if (e > 0) drift[b] = profiles.drift_corr * drift[b] + innov * z(rng);
        const double jitter = std::exp(js * z(rng) - 0.5 * js * js);
        weight[e][b] = profiles[stages[e]].band_uv[b] * jitter * std::exp(drift[b]);
      }
    }
  }

  std::vector<double> grid(n, 0.0);
  {
    Rng rng(derive_seed(seed, {kBandNoise}));
    for (std::size_t b = 0; b < 4; ++b) {
      const auto& band = features::kBands[b];
      const auto noise = band_noise(n, band.low_hz, band.high_hz, rng);
      for (std::size_t k = 0; k < n; ++k) grid[k] += weight[epoch_of(k)][b] * noise[k];
    }
  }
  {
    Rng rng(derive_seed(seed, {kBroadband}));
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) grid[k] += profiles[stages[epoch_of(k)]].noise_uv * z(rng);
  }

  // Movement artifacts: one large Gaussian deflection well inside the epoch.
  night.spiked.assign(n_epochs, false);
  {
    Rng rng(derive_seed(seed, {kSpikes}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    constexpr double amplitude_uv = 1000.0;
    constexpr double width_samples = 5.0;  // 20 ms
    for (std::size_t e = 0; e < n_epochs; ++e) {
      const double hit = u(rng), where = u(rng), sign = u(rng) < 0.5 ? -1.0 : 1.0;
      if (hit >= profiles[stages[e]].spike_prob) continue;
      night.spiked[e] = true;
      const double center = static_cast<double>(pad + e * signal::kEpochSamples) + (3.0 + 24.0 * where) * signal::kTargetRate;
      const auto lo = static_cast<std::size_t>(center - 8 * width_samples);
      const auto hi = static_cast<std::size_t>(center + 8 * width_samples);
      for (std::size_t k = lo; k <= hi; ++k) {
        const double d = (static_cast<double>(k) - center) / width_samples;
        grid[k] += sign * amplitude_uv * std::exp(-0.5 * d * d);
      }
    }
  }

  // Jittered acquisition timestamps; values interpolated from the grid.
  auto& rec = night.recording;
  rec.participant_id = options.participant_id;
  rec.night_index = options.night_index;
  rec.nominal_rate = signal::kTargetRate;
  rec.t_ms.resize(n);
  rec.uv.resize(n);
  {
    Rng rng(derive_seed(seed, {kTimestamps}));
    const double j = std::min(options.timestamp_jitter_ms, 0.499 * step_ms);
    std::uniform_real_distribution<double> u(-j, j);
    for (std::size_t k = 0; k < n; ++k) {
      const double offset = j > 0.0 ? u(rng) : 0.0;
      const double pos = std::clamp(static_cast<double>(k) + offset / step_ms, 0.0, static_cast<double>(n - 1));
      const auto i = std::min(static_cast<std::size_t>(pos), n - 2);
      const double w = pos - static_cast<double>(i);
      rec.t_ms[k] = grid_start + static_cast<double>(k) * step_ms + offset;
      rec.uv[k] = grid[i] + w * (grid[i + 1] - grid[i]);
    }
  }
  return night;
}

// ---------------------------------------------------------------------------

std::vector<int> study_night_distribution(std::size_t n_participants) {
  if (n_participants != 11) return std::vector<int>(n_participants, 1);
  std::vector<int> d(8, 1);
  d.insert(d.end(), {2, 2, 3});
  return d;
}

std::string participant_name(std::size_t index) { return fmt::format("P{:02d}", index + 1); }

ProfileSet participant_profile(const CohortConfig& config, std::size_t index) {
  Rng rng(derive_seed(config.seed, {0x9a27ULL, index}));
  std::uniform_real_distribution<double> factor(config.perturb_low, config.perturb_high);
  std::array<double, 4> scale{};
  for (double& f : scale) f = factor(rng);
  ProfileSet p = config.profiles;
  for (auto& st : p.stage)
    for (std::size_t b = 0; b < 4; ++b) st.band_uv[b] *= scale[b];
  return p;
}

std::vector<int> cohort_nights(const CohortConfig& config) {
  if (config.n_participants < 2) throw Error(ErrorKind::InvalidArgument, "a cohort needs at least 2 participants");
  std::vector<int> nights = config.nights_per_participant;
  if (nights.empty()) nights.assign(config.n_participants, 1);
  if (nights.size() != config.n_participants)
    throw Error(ErrorKind::InvalidArgument, "nights_per_participant must list every participant");
  for (int k : nights)
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "every participant needs at least one night");
  return nights;
}

SyntheticNight gen_cohort_night(const CohortConfig& config, std::size_t participant, int night) {
  NightOptions opt;
  opt.participant_id = participant_name(participant);
  opt.night_index = night;
  opt.start_ms = 1'700'000'000'000 + static_cast<std::int64_t>(participant) * 7 * 86'400'000 +
                 static_cast<std::int64_t>(night - 1) * 86'400'000;
  return gen_night(config.duration_min, participant_profile(config, participant),
                   derive_seed(config.seed, {participant, static_cast<std::uint64_t>(night)}), opt);
}

std::vector<SyntheticNight> gen_cohort(const CohortConfig& config) {
  const auto nights = cohort_nights(config);
  struct Job {
    std::size_t participant;
    int night;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < nights.size(); ++p)
    for (int k = 1; k <= nights[p]; ++k) jobs.push_back({p, k});

  std::vector<SyntheticNight> out(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) { out[j] = gen_cohort_night(config, jobs[j].participant, jobs[j].night); });
  return out;
}

}  // namespace earsleep::synth
