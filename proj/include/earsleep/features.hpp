#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "earsleep/signal.hpp"

namespace earsleep::features {

struct FrequencyBand {
  std::string_view name;
  double low_hz;
  double high_hz;
};

/// Classical EEG bands. Bins are assigned half-open [low, high).
inline constexpr std::array<FrequencyBand, 4> kBands = {{
    {"delta", 0.5, 4.0},
    {"theta", 4.0, 8.0},
    {"alpha", 8.0, 12.0},
    {"beta", 12.0, 30.0},
}};

inline constexpr double kInBandLow = 0.5;
inline constexpr double kInBandHigh = 30.0;
inline constexpr double kPowerEpsilon = 1e-12;

/// Registry order of the per-epoch feature vector. Kurtosis is excess
/// kurtosis (0 for a Gaussian).
inline constexpr std::array<std::string_view, 26> kFeatureNames = {
    "std",
    "variance",
    "skewness",
    "kurtosis",
    "zero_crossing_rate",
    "p75",
    "hjorth_mobility",
    "hjorth_complexity",
    "rel_power_delta",
    "rel_power_theta",
    "rel_power_alpha",
    "rel_power_beta",
    "ratio_delta_theta",
    "ratio_theta_alpha",
    "ratio_alpha_beta",
    "ratio_slow_fast",
    "spectral_entropy",
    "spectral_edge_freq",
    "peak_freq",
    "median_freq",
    "mean_freq_diff",
    "cwt_p75_delta",
    "cwt_p75_theta",
    "cwt_p75_alpha",
    "cwt_p75_beta",
    "lempel_ziv",
};

inline constexpr std::size_t kFeatureCount = kFeatureNames.size();

using FeatureVector = std::array<double, kFeatureCount>;

/// Scaling the epoch by c > 0 scales feature i by c^kScaleExponent[i]:
/// 1 for std, p75 and the CWT percentiles, 2 for variance, 0 (invariant) for
/// everything else.
inline constexpr std::array<int, kFeatureCount> kScaleExponent = {
    1, 2, 0, 0, 0, 1, 0, 0,  // time domain
    0, 0, 0, 0,              // relative band powers
    0, 0, 0, 0,              // band ratios
    0, 0, 0, 0, 0,           // spectral descriptors
    1, 1, 1, 1,              // CWT percentiles
    0,                       // Lempel-Ziv
};

// ---------------------------------------------------------------------------

struct TimeDomain {
  double std, variance, skewness, kurtosis, zero_crossing_rate, p75, hjorth_mobility, hjorth_complexity;
};

/// Throws DegenerateEpoch for zero-variance input.
TimeDomain time_domain(std::span<const double> x);

struct WelchParams {
  std::size_t segment = 1000;
  std::size_t overlap = 500;
  double sample_rate_hz = signal::kTargetRate;
};

/// One-sided power spectral density in uV^2/Hz on a uniform grid from 0 Hz
/// to Nyquist.
struct Psd {
  std::vector<double> freq_hz;
  std::vector<double> power;

  double bin_width() const { return freq_hz.size() > 1 ? freq_hz[1] - freq_hz[0] : 0.0; }
};

/// Welch's method: Hann window, per-segment mean removal, averaged
/// periodograms with density scaling.
Psd welch_psd(std::span<const double> x, const WelchParams& params = {});

struct BandPowers {
  std::array<double, 4> absolute{};  // uV^2
  std::array<double, 4> relative{};
  double delta_theta = 0, theta_alpha = 0, alpha_beta = 0, slow_fast = 0;
};

/// Throws DegenerateEpoch when total 0.5-30 Hz power is below kPowerEpsilon.
BandPowers band_powers(const Psd& psd);

struct SpectralDescriptors {
  double entropy, edge_freq, peak_freq, median_freq, mean_freq_diff;
};

/// Spectral centroid over the 0.5-30 Hz bins.
double spectral_centroid(const Psd& psd);

/// Descriptors of `psd` (the whole epoch). mean_freq_diff needs the samples,
/// since it compares the centroids of the second and first halves.
SpectralDescriptors spectral_descriptors(const Psd& psd, std::span<const double> x,
                                         const WelchParams& params = {});

struct CwtParams {
  double omega0 = 6.0;
  int voices_per_band = 10;
  double sample_rate_hz = signal::kTargetRate;
};

/// Pseudo-frequencies (Hz) sampled log-uniformly inside a band.
std::vector<double> band_voices(const FrequencyBand& band, int voices);

/// Amplitude-normalized analytic Morlet coefficients at one pseudo-frequency;
/// a sinusoid of amplitude A at that frequency yields |W| close to A.
std::vector<std::complex<double>> morlet_cwt(std::span<const double> x, double freq_hz,
                                             const CwtParams& params = {});

std::array<double, 4> cwt_band_percentiles(std::span<const double> x, const CwtParams& params = {});

/// LZ76 phrase count of a binary sequence. A trailing phrase that merely
/// repeats earlier history is not a new phrase.
std::size_t lz76_phrases(const std::vector<bool>& bits);

/// Median-binarized LZ76 complexity normalized by n / log2(n).
double lempel_ziv(std::span<const double> x);

FeatureVector extract_all(std::span<const double> samples);
FeatureVector extract_all(const signal::Epoch& epoch);

/// Percentile q in [0, 1], linearly interpolated between order statistics
/// (numpy's default rule).
double percentile(std::vector<double> values, double q);

}  // namespace earsleep::features
