#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "earsleep/signal.hpp"

namespace earsleep::synth {

/// Stage-dependent signal recipe. Band weights are the standard deviations
/// (uV) of unit-variance band-limited noise in delta, theta, alpha, beta.
struct StageProfile {
  std::array<double, 4> band_uv{};
  double noise_uv = 0.0;
  double spike_prob = 0.0;  // per epoch
};

struct ProfileSet {
  std::array<StageProfile, 4> stage{};  // indexed by SleepStage
  double epoch_jitter = 0.15;           // log-normal sigma of per-epoch band weights
  double drift_sd = 0.1;                // stationary sigma of the slow log-weight drift
  double drift_corr = 0.98;             // epoch-to-epoch correlation of the drift

  const StageProfile& operator[](SleepStage s) const { return stage[static_cast<std::size_t>(s)]; }
  StageProfile& operator[](SleepStage s) { return stage[static_cast<std::size_t>(s)]; }

  /// Deep >> Core > REM ~ Awake in delta; Awake strongest in alpha and beta.
  static ProfileSet defaults();

  /// Every stage shares one profile, so the signal carries no stage
  /// information; a strong slow drift keeps features autocorrelated.
  static ProfileSet null_signal();

  void set_spike_prob(double p);
};

struct NightOptions {
  std::int64_t start_ms = 1'700'000'000'000;  // first hypnogram epoch
  double pad_s = 2.0;                          // recording margin before and after the hypnogram
  double timestamp_jitter_ms = 2.0;
  std::string participant_id = "P01";
  int night_index = 1;
};

struct SyntheticNight {
  std::string participant_id;
  std::string recording_id;
  int night_index = 1;
  signal::Hypnogram hypnogram;
  signal::Recording recording;
  std::optional<std::int64_t> onset_ms;  // ground-truth onset (3-epoch asleep run)
  std::vector<bool> spiked;              // per hypnogram epoch
};

/// Stage sequence from a wake-started Markov chain with multi-minute dwell
/// times.
std::vector<SleepStage> markov_stages(std::size_t n_epochs, std::uint64_t seed);

/// Throws InvalidArgument for durations under 10 minutes.
SyntheticNight gen_night(double duration_min, const ProfileSet& profiles, std::uint64_t seed,
                         const NightOptions& options = {});

struct CohortConfig {
  std::size_t n_participants = 11;
  std::vector<int> nights_per_participant;  // empty: one night each
  double duration_min = 350.0;
  ProfileSet profiles = ProfileSet::defaults();
  double perturb_low = 0.7;
  double perturb_high = 1.3;
  std::uint64_t seed = 1;
};

/// 8 x 1 night, 2 x 2 nights, 1 x 3 nights for eleven participants; other
/// sizes fall back to one night each.
std::vector<int> study_night_distribution(std::size_t n_participants);

/// Profile of participant `index` (0-based): every band weight scaled by a
/// factor drawn from [perturb_low, perturb_high].
ProfileSet participant_profile(const CohortConfig& config, std::size_t index);

std::string participant_name(std::size_t index);

/// Nights per participant after validation (empty config: one each).
std::vector<int> cohort_nights(const CohortConfig& config);

/// Night `night` (1-based) of participant `participant` (0-based); identical to
/// the corresponding element of gen_cohort.
SyntheticNight gen_cohort_night(const CohortConfig& config, std::size_t participant, int night);

/// Nights are generated independently from seeds derived per (participant,
/// night), so the cohort does not depend on generation order.
std::vector<SyntheticNight> gen_cohort(const CohortConfig& config);

}  // namespace earsleep::synth
