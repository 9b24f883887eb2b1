#pragma once

// Test signals and brute-force oracles. Nothing here calls into the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace testing {

inline constexpr double kFs = 250.0;
inline constexpr std::size_t kN = 7500;
inline constexpr double kPi = std::numbers::pi;

/// Deterministic 30 s test epoch; tests/oracles/frozen_reference.py builds the
/// same samples.
inline std::vector<double> reference_epoch() {
  std::vector<double> x(kN);
  std::uint64_t st = 12345;
  for (std::size_t n = 0; n < kN; ++n) {
    const double t = static_cast<double>(n) / kFs;
    st = st * 6364136223846793005ULL + 1442695040888963407ULL;
    const double u = static_cast<double>(st >> 11) * 0x1.0p-53 - 0.5;
    x[n] = 20 * std::sin(2 * kPi * 1.7 * t) + 8 * std::sin(2 * kPi * 6.2 * t + 0.3) +
           5 * std::sin(2 * kPi * 10.4 * t + 1.1) + 3 * std::sin(2 * kPi * 21.3 * t + 2.0) +
           6 * std::sin(2 * kPi * (2 * t + (4.0 / 30.0) * t * t)) + 4 * u;
  }
  return x;
}

inline std::vector<double> sine(double freq_hz, double amplitude = 1.0, std::size_t n = kN, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amplitude * std::sin(2 * kPi * freq_hz * static_cast<double>(i) / kFs + phase);
  return x;
}

inline std::vector<double> white_noise(std::uint64_t seed, double sd = 1.0, std::size_t n = kN) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sd);
  std::vector<double> x(n);
  for (double& v : x) v = z(rng);
  return x;
}

/// Random mixture of four tones and white noise.
inline std::vector<double> random_epoch(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto x = white_noise(seed + 1000, 1.0 + 10.0 * u(rng));
  for (int k = 0; k < 4; ++k) {
    const double f = 0.5 + 35.0 * u(rng), a = 40.0 * u(rng), ph = 2 * kPi * u(rng);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += a * std::sin(2 * kPi * f * static_cast<double>(i) / kFs + ph);
  }
  return x;
}

inline std::vector<double> alternating(std::size_t n = kN) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = i % 2 == 0 ? 1.0 : -1.0;
  return x;
}

// ---------------------------------------------------------------------------
// Oracles.

/// Magnitude of the bilinear-transformed Butterworth bandpass of prototype
/// order `order`, from the closed-form analog response at the prewarped
/// frequency.
inline double butterworth_bandpass_mag(double f, double lo, double hi, int order, double fs = kFs) {
  auto warp = [&](double hz) { return 2.0 * fs * std::tan(kPi * hz / fs); };
  const double w = warp(f), w1 = warp(lo), w2 = warp(hi);
  if (w == 0.0) return 0.0;
  const double x = (w * w - w1 * w2) / (w * (w2 - w1));
  return 1.0 / std::sqrt(1.0 + std::pow(x * x, order));
}

/// Welch PSD with an O(n^2) DFT per segment: periodic Hann, mean removal,
/// density scaling, one-sided.
inline std::vector<double> naive_welch(const std::vector<double>& x, std::size_t seg = 1000, std::size_t step = 500,
                                       double fs = kFs) {
  std::vector<double> win(seg);
  double u = 0;
  for (std::size_t k = 0; k < seg; ++k) {
    win[k] = std::pow(std::sin(kPi * static_cast<double>(k) / static_cast<double>(seg)), 2);
    u += win[k] * win[k];
  }
  const std::size_t bins = seg / 2 + 1;
  std::vector<double> psd(bins, 0.0);
  std::size_t count = 0;
  for (std::size_t s = 0; s + seg <= x.size(); s += step, ++count) {
    double mean = 0;
    for (std::size_t k = 0; k < seg; ++k) mean += x[s + k];
    mean /= static_cast<double>(seg);
    for (std::size_t b = 0; b < bins; ++b) {
      std::complex<double> acc;
      for (std::size_t k = 0; k < seg; ++k)
        acc += (x[s + k] - mean) * win[k] *
               std::polar(1.0, -2 * kPi * static_cast<double>(b * k % seg) / static_cast<double>(seg));
      double p = std::norm(acc) / (fs * u);
      if (b != 0 && b != seg / 2) p *= 2;
      psd[b] += p;
    }
  }
  for (double& p : psd) p /= static_cast<double>(count);
  return psd;
}

/// |W(b)| by direct convolution with the sampled complex Morlet atom of
/// center frequency freq_hz (omega0 = 6).
inline std::vector<double> direct_morlet_abs(const std::vector<double>& x, double freq_hz, double fs = kFs) {
  const double s = 6.0 * fs / (2 * kPi * freq_hz);
  const auto half = static_cast<long>(std::ceil(8 * s));
  const auto n = static_cast<long>(x.size());
  std::vector<std::complex<double>> atom(static_cast<std::size_t>(2 * half + 1));
  for (long j = -half; j <= half; ++j) {
    const double jj = static_cast<double>(j);
    atom[static_cast<std::size_t>(j + half)] =
        std::sqrt(2 / kPi) / s * std::polar(1.0, 6.0 * jj / s) * std::exp(-jj * jj / (2 * s * s));
  }
  std::vector<double> out(x.size());
  for (long b = 0; b < n; ++b) {
    std::complex<double> acc;
    for (long j = std::max(-half, b - n + 1); j <= std::min(half, b); ++j)
      acc += x[static_cast<std::size_t>(b - j)] * atom[static_cast<std::size_t>(j + half)];
    out[static_cast<std::size_t>(b)] = std::abs(acc);
  }
  return out;
}

/// LZ76 phrase count by explicit substring search: each phrase is the
/// shortest extension not found in the preceding text (overlap allowed); a
/// trailing phrase that only copies history is not counted.
inline std::size_t lz76_bruteforce(const std::vector<bool>& bits) {
  std::string s;
  for (bool b : bits) s += b ? '1' : '0';
  const std::size_t n = s.size();
  std::size_t i = 0, c = 0;
  while (i < n) {
    std::size_t k = 1;
    while (i + k <= n && s.substr(0, i + k - 1).find(s.substr(i, k)) != std::string::npos) ++k;
    if (i + k > n) {
      if (c == 0) c = 1;
      break;
    }
    ++c;
    i += k;
  }
  return c;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("earsleep_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
