#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "earsleep/stage.hpp"

namespace earsleep::signal {

inline constexpr double kTargetRate = 250.0;
inline constexpr std::int64_t kEpochMs = 30'000;
inline constexpr std::size_t kEpochSamples = 7500;

/// Single-channel biopotential recording. Timestamps are milliseconds since
/// the Unix epoch (fractional values allowed), values are microvolts.
struct Recording {
  std::string participant_id;
  int night_index = 0;
  std::vector<double> t_ms;
  std::vector<double> uv;
  double nominal_rate = kTargetRate;

  std::size_t size() const noexcept { return t_ms.size(); }
  double span_ms() const noexcept { return t_ms.empty() ? 0.0 : t_ms.back() - t_ms.front(); }
};

/// Throws EmptyRecording / NonFiniteSample / InvalidArgument when the
/// recording violates its invariants.
void validate(const Recording& rec);

struct HypnogramEntry {
  std::int64_t start_ms = 0;
  SleepStage stage = SleepStage::Awake;
};

/// Reference labels, one entry per 30 s epoch, sorted and non-overlapping.
struct Hypnogram {
  std::vector<HypnogramEntry> entries;

  std::int64_t begin_ms() const { return entries.front().start_ms; }
  std::int64_t end_ms() const { return entries.back().start_ms + kEpochMs; }
};

void validate(const Hypnogram& hyp);

enum class Artifact : std::uint8_t { Clean, AmplitudeExceeded, LowVariance };

std::string_view to_string(Artifact a);

struct Epoch {
  std::int64_t start_ms = 0;
  std::size_t index = 0;  // slot number on the hypnogram's 30 s grid
  std::vector<double> samples;
  SleepStage label = SleepStage::Awake;
  Artifact artifact = Artifact::Clean;
};

enum class PhaseMode { Causal, ZeroPhase };

struct FilterSpec {
  int order = 4;
  double low_cut_hz = 0.5;
  double high_cut_hz = 30.0;
  double sample_rate_hz = kTargetRate;
  PhaseMode phase_mode = PhaseMode::ZeroPhase;
};

/// Normalized biquad, a0 == 1.
struct Biquad {
  double b0, b1, b2;
  double a1, a2;
};

using Sos = std::vector<Biquad>;

// ---------------------------------------------------------------------------

/// Linear interpolation onto a uniform grid starting at the first timestamp.
Recording resample(const Recording& rec, double target_rate_hz);

/// Butterworth bandpass (analog prototype of order spec.order, bilinear
/// transform with prewarped edges). Yields `order` biquads, each with zeros at
/// z = +1 and z = -1 and unit gain at the digital center frequency.
Sos design_bandpass(const FilterSpec& spec);

std::complex<double> frequency_response(const Sos& sos, double freq_hz, double sample_rate_hz);
std::vector<std::complex<double>> poles(const Sos& sos);

std::vector<double> apply_filter(std::span<const double> x, const Sos& sos, PhaseMode mode);
std::vector<double> apply_filter(std::span<const double> x, const FilterSpec& spec);

/// Cuts a resampled, filtered recording into 30 s epochs on the hypnogram's
/// grid (anchored at its first entry). Each slot gets the stage with the
/// largest labelled overlap; ties go to the stage whose overlap comes first.
/// Slots not fully covered by the recording, or with less than half of their
/// duration labelled, are dropped.
std::vector<Epoch> segment(const Recording& rec, const Hypnogram& hyp);

struct RejectionLimits {
  double amp_limit_uv = 500.0;
  double var_floor_uv2 = 1.0;
};

Artifact classify_artifact(std::span<const double> samples, const RejectionLimits& limits);

/// Annotates every epoch in place; nothing is removed.
void reject_artifacts(std::vector<Epoch>& epochs, const RejectionLimits& limits = {});

struct RejectionSummary {
  std::size_t clean = 0;
  std::size_t amplitude = 0;
  std::size_t low_variance = 0;

  std::size_t total() const { return clean + amplitude + low_variance; }
};

RejectionSummary summarize(const std::vector<Epoch>& epochs);

// ---------------------------------------------------------------------------
// Canonical text interchange.

Recording read_recording(const std::string& path);
void write_recording(const std::string& path, const Recording& rec);
Hypnogram read_hypnogram(const std::string& path);
void write_hypnogram(const std::string& path, const Hypnogram& hyp);

Recording parse_recording(std::string_view text);
Hypnogram parse_hypnogram(std::string_view text);

}  // namespace earsleep::signal
