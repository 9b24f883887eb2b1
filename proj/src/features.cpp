#include "earsleep/features.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "earsleep/error.hpp"
#include "fft.hpp"

namespace earsleep::features {

using cplx = std::complex<double>;

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "percentile of an empty set");
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  auto lo_it = values.begin() + static_cast<std::ptrdiff_t>(lo);
  std::nth_element(values.begin(), lo_it, values.end());
  const double v_lo = *lo_it;
  if (frac == 0.0 || lo + 1 >= values.size()) return v_lo;
  const double v_hi = *std::min_element(lo_it + 1, values.end());
  return v_lo + frac * (v_hi - v_lo);
}

namespace {

struct Moments {
  double mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
};

Moments central_moments(std::span<const double> x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  for (double v : x) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

double variance(std::span<const double> x) { return central_moments(x).m2; }

std::vector<double> diff(std::span<const double> x) {
  std::vector<double> d(x.size() > 0 ? x.size() - 1 : 0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
  return d;
}

}  // namespace

TimeDomain time_domain(std::span<const double> x) {
  if (x.size() < 3) throw Error(ErrorKind::DegenerateEpoch, "too few samples for time-domain features");
  const Moments m = central_moments(x);
  if (!(m.m2 > 0.0)) throw Error(ErrorKind::DegenerateEpoch, "epoch has zero variance");

  const auto dx = diff(x);
  const auto ddx = diff(dx);
  const double var_dx = variance(dx);
  if (!(var_dx > 0.0)) throw Error(ErrorKind::DegenerateEpoch, "first difference has zero variance");
  const double var_ddx = variance(ddx);

  std::size_t crossings = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    if ((x[i] < 0.0) != (x[i + 1] < 0.0)) ++crossings;

  TimeDomain td;
  td.variance = m.m2;
  td.std = std::sqrt(m.m2);
  td.skewness = m.m3 / std::pow(m.m2, 1.5);
  td.kurtosis = m.m4 / (m.m2 * m.m2) - 3.0;
  td.zero_crossing_rate = static_cast<double>(crossings) / static_cast<double>(x.size() - 1);
  td.p75 = percentile({x.begin(), x.end()}, 0.75);
  td.hjorth_mobility = std::sqrt(var_dx / m.m2);
  td.hjorth_complexity = std::sqrt(var_ddx / var_dx) / td.hjorth_mobility;
  return td;
}

// ---------------------------------------------------------------------------

Psd welch_psd(std::span<const double> x, const WelchParams& params) {
  if (x.empty()) throw Error(ErrorKind::InvalidArgument, "Welch PSD of an empty signal");
  const std::size_t seg = std::min(params.segment, x.size());
  const std::size_t overlap = std::min(params.overlap, seg - 1);
  const std::size_t step = seg - overlap;
  const std::size_t n_seg = 1 + (x.size() - seg) / step;
  const std::size_t n_bins = seg / 2 + 1;
  const double fs = params.sample_rate_hz;

  // Periodic Hann window.
  std::vector<double> window(seg);
  double win_power = 0.0;
  for (std::size_t k = 0; k < seg; ++k) {
    window[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(seg));
    win_power += window[k] * window[k];
  }
  const double scale = 1.0 / (fs * win_power);

  Psd psd;
  psd.freq_hz.resize(n_bins);
  psd.power.assign(n_bins, 0.0);
  for (std::size_t k = 0; k < n_bins; ++k) psd.freq_hz[k] = static_cast<double>(k) * fs / static_cast<double>(seg);

  std::vector<double> buf(seg);
  std::vector<cplx> spec(n_bins);
  for (std::size_t s = 0; s < n_seg; ++s) {
    const auto part = x.subspan(s * step, seg);
    double mean = 0.0;
    for (double v : part) mean += v;
    mean /= static_cast<double>(seg);
    for (std::size_t k = 0; k < seg; ++k) buf[k] = (part[k] - mean) * window[k];
    dsp::rfft(buf, spec);
    for (std::size_t k = 0; k < n_bins; ++k) {
      double p = std::norm(spec[k]) * scale;
      const bool edge = k == 0 || (seg % 2 == 0 && k == n_bins - 1);
      if (!edge) p *= 2.0;
      psd.power[k] += p;
    }
  }
  for (double& p : psd.power) p /= static_cast<double>(n_seg);
  return psd;
}

namespace {

bool in_range(double f, double lo, double hi) { return f >= lo && f < hi; }

double guarded_ratio(double num, double den) { return num / std::max(den, kPowerEpsilon); }

}  // namespace

BandPowers band_powers(const Psd& psd) {
  BandPowers bp;
  const double df = psd.bin_width();
  for (std::size_t k = 0; k < psd.freq_hz.size(); ++k) {
    for (std::size_t b = 0; b < kBands.size(); ++b)
      if (in_range(psd.freq_hz[k], kBands[b].low_hz, kBands[b].high_hz)) bp.absolute[b] += psd.power[k] * df;
  }
  double total = 0.0;
  for (double a : bp.absolute) total += a;
  if (!(total >= kPowerEpsilon)) throw Error(ErrorKind::DegenerateEpoch, "no power in 0.5-30 Hz");
  for (std::size_t b = 0; b < 4; ++b) bp.relative[b] = bp.absolute[b] / total;

  const auto& a = bp.absolute;
  bp.delta_theta = guarded_ratio(a[0], a[1]);
  bp.theta_alpha = guarded_ratio(a[1], a[2]);
  bp.alpha_beta = guarded_ratio(a[2], a[3]);
  bp.slow_fast = guarded_ratio(a[1] + a[0], a[2] + a[3]);
  return bp;
}

double spectral_centroid(const Psd& psd) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < psd.freq_hz.size(); ++k) {
    if (!in_range(psd.freq_hz[k], kInBandLow, kInBandHigh)) continue;
    num += psd.freq_hz[k] * psd.power[k];
    den += psd.power[k];
  }
  if (!(den > 0.0)) throw Error(ErrorKind::DegenerateEpoch, "no in-band power for the spectral centroid");
  return num / den;
}

SpectralDescriptors spectral_descriptors(const Psd& psd, std::span<const double> x, const WelchParams& params) {
  std::vector<double> f, p;
  for (std::size_t k = 0; k < psd.freq_hz.size(); ++k) {
    if (!in_range(psd.freq_hz[k], kInBandLow, kInBandHigh)) continue;
    f.push_back(psd.freq_hz[k]);
    p.push_back(psd.power[k]);
  }
  double total = 0.0;
  for (double v : p) total += v;
  if (f.size() < 2 || !(total > 0.0)) throw Error(ErrorKind::DegenerateEpoch, "no in-band power");

  SpectralDescriptors sd{};
  double h = 0.0;
  for (double v : p) {
    const double q = v / total;
    if (q > 0.0) h -= q * std::log(q);
  }
  sd.entropy = h / std::log(static_cast<double>(p.size()));

  auto cumulative_freq = [&](double fraction) {
    double cum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      cum += p[k];
      if (cum >= fraction * total) return f[k];
    }
    return f.back();
  };
  sd.edge_freq = cumulative_freq(0.95);
  sd.median_freq = cumulative_freq(0.5);
  sd.peak_freq = f[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];

  const std::size_t half = x.size() / 2;
  const double first = spectral_centroid(welch_psd(x.first(half), params));
  const double second = spectral_centroid(welch_psd(x.subspan(half, half), params));
  sd.mean_freq_diff = second - first;
  return sd;
}

// ---------------------------------------------------------------------------

std::vector<double> band_voices(const FrequencyBand& band, int voices) {
  std::vector<double> out(static_cast<std::size_t>(voices));
  const double ratio = band.high_hz / band.low_hz;
  for (int i = 0; i < voices; ++i)
    out[static_cast<std::size_t>(i)] = band.low_hz * std::pow(ratio, (i + 0.5) / voices);
  return out;
}

namespace {

bool is_smooth(std::size_t n) {
  for (std::size_t p : {2u, 3u, 5u})
    while (n % p == 0) n /= p;
  return n == 1;
}

// Zero-padded transform length large enough that the widest wavelet used
// (lowest pseudo-frequency) does not wrap around onto the signal.
std::size_t padded_length(std::size_t n, double min_freq_hz, const CwtParams& params) {
  const double sigma_samples = params.omega0 / (2.0 * std::numbers::pi * min_freq_hz) * params.sample_rate_hz;
  std::size_t m = n + static_cast<std::size_t>(std::ceil(5.0 * sigma_samples));
  while (!is_smooth(m)) ++m;
  return m;
}

struct Spectrum {
  std::size_t m = 0;
  std::vector<cplx> bins;  // one-sided, m/2 + 1 entries
};

Spectrum padded_spectrum(std::span<const double> x, std::size_t m) {
  std::vector<double> padded(m, 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  Spectrum s{m, std::vector<cplx>(m / 2 + 1)};
  dsp::rfft(padded, s.bins);
  return s;
}

void morlet_from_spectrum(const Spectrum& spec, std::size_t n, double freq_hz, const CwtParams& params,
                          std::vector<cplx>& work, std::vector<cplx>& out) {
  const double scale = params.omega0 / (2.0 * std::numbers::pi * freq_hz);
  const double d_omega = 2.0 * std::numbers::pi * params.sample_rate_hz / static_cast<double>(spec.m);
  work.assign(spec.m, cplx{});
  for (std::size_t k = 1; k < spec.m / 2; ++k) {
    const double u = scale * d_omega * static_cast<double>(k) - params.omega0;
    if (std::abs(u) > 40.0) continue;
    work[k] = spec.bins[k] * (2.0 * std::exp(-0.5 * u * u));
  }
  out.resize(spec.m);
  dsp::ifft(work, out);
  out.resize(n);
}

}  // namespace

std::vector<std::complex<double>> morlet_cwt(std::span<const double> x, double freq_hz, const CwtParams& params) {
  const Spectrum spec = padded_spectrum(x, padded_length(x.size(), freq_hz, params));
  std::vector<cplx> work, out;
  morlet_from_spectrum(spec, x.size(), freq_hz, params, work, out);
  return out;
}

namespace {

// percentile(sqrt(v), q) without taking every square root: sqrt is
// monotone, so only the two bracketing order statistics are transformed.
double sqrt_percentile(std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  auto lo_it = v.begin() + static_cast<std::ptrdiff_t>(lo);
  std::nth_element(v.begin(), lo_it, v.end());
  const double v_lo = std::sqrt(*lo_it);
  if (frac == 0.0 || lo + 1 >= v.size()) return v_lo;
  const double v_hi = std::sqrt(*std::min_element(lo_it + 1, v.end()));
  return v_lo + frac * (v_hi - v_lo);
}

}  // namespace

std::array<double, 4> cwt_band_percentiles(std::span<const double> x, const CwtParams& params) {
  const auto lowest = band_voices(kBands[0], params.voices_per_band).front();
  const Spectrum spec = padded_spectrum(x, padded_length(x.size(), lowest, params));

  std::array<double, 4> result{};
  std::vector<cplx> work, coeffs;
  std::vector<double> pooled;
  for (std::size_t b = 0; b < kBands.size(); ++b) {
    pooled.clear();
    for (double f : band_voices(kBands[b], params.voices_per_band)) {
      morlet_from_spectrum(spec, x.size(), f, params, work, coeffs);
      for (const cplx& c : coeffs) pooled.push_back(std::norm(c));
    }
    result[b] = sqrt_percentile(pooled, 0.75);
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

// Suffix automaton over a growing binary prefix. `split` reports the state
// that the last extension cloned, so a walker can follow its string.
class SuffixAutomaton {
 public:
  struct State {
    std::size_t len = 0;
    int link = -1;
    std::array<int, 2> next{-1, -1};
  };

  explicit SuffixAutomaton(std::size_t capacity) {
    states_.reserve(2 * capacity + 1);
    states_.emplace_back();
  }

  const State& operator[](int s) const { return states_[static_cast<std::size_t>(s)]; }

  struct Split {
    int original = -1;
    int clone = -1;
  };

  Split extend(int c) {
    const int cur = add({states_[static_cast<std::size_t>(last_)].len + 1, -1, {-1, -1}});
    int p = last_;
    last_ = cur;
    while (p != -1 && at(p).next[c] == -1) {
      at(p).next[c] = cur;
      p = at(p).link;
    }
    if (p == -1) {
      at(cur).link = 0;
      return {};
    }
    const int q = at(p).next[c];
    if (at(p).len + 1 == at(q).len) {
      at(cur).link = q;
      return {};
    }
    const int clone = add({at(p).len + 1, at(q).link, at(q).next});
    while (p != -1 && at(p).next[c] == q) {
      at(p).next[c] = clone;
      p = at(p).link;
    }
    at(q).link = clone;
    at(cur).link = clone;
    return {q, clone};
  }

 private:
  State& at(int s) { return states_[static_cast<std::size_t>(s)]; }
  int add(State st) {
    states_.push_back(st);
    return static_cast<int>(states_.size() - 1);
  }

  std::vector<State> states_;
  int last_ = 0;
};

}  // namespace

// Phrase at l = longest match s[l..l+m) starting before l (overlap allowed),
// plus one novel symbol. A match of s[l..l+m) starting before l is exactly an
// occurrence inside s[0..l+m-1), so the automaton is kept one symbol behind
// the match frontier.
std::size_t lz76_phrases(const std::vector<bool>& bits) {
  const std::size_t n = bits.size();
  if (n < 2) return n;
  SuffixAutomaton sam(n);
  sam.extend(bits[0]);
  std::size_t c = 1, l = 1, built = 1;
  while (l < n) {
    int state = 0;
    std::size_t m = 0;
    while (true) {
      if (l + m >= n) return c;  // remainder copies history
      while (built < l + m) {
        const auto split = sam.extend(bits[built++]);
        if (split.original == state && m <= sam[split.clone].len) state = split.clone;
      }
      const int nxt = sam[state].next[bits[l + m]];
      if (nxt == -1) break;
      state = nxt;
      ++m;
    }
    ++c;
    l += m + 1;
  }
  return c;
}

double lempel_ziv(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorKind::InvalidArgument, "Lempel-Ziv needs at least 2 samples");
  const double median = percentile({x.begin(), x.end()}, 0.5);
  std::vector<bool> bits(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) bits[i] = x[i] > median;
  const double n = static_cast<double>(x.size());
  return static_cast<double>(lz76_phrases(bits)) * std::log2(n) / n;
}

// ---------------------------------------------------------------------------

FeatureVector extract_all(std::span<const double> x) {
  const TimeDomain td = time_domain(x);
  const Psd psd = welch_psd(x);
  const BandPowers bp = band_powers(psd);
  const SpectralDescriptors sd = spectral_descriptors(psd, x);
  const auto cwt = cwt_band_percentiles(x);

  FeatureVector v{td.std,
                  td.variance,
                  td.skewness,
                  td.kurtosis,
                  td.zero_crossing_rate,
                  td.p75,
                  td.hjorth_mobility,
                  td.hjorth_complexity,
                  bp.relative[0],
                  bp.relative[1],
                  bp.relative[2],
                  bp.relative[3],
                  bp.delta_theta,
                  bp.theta_alpha,
                  bp.alpha_beta,
                  bp.slow_fast,
                  sd.entropy,
                  sd.edge_freq,
                  sd.peak_freq,
                  sd.median_freq,
                  sd.mean_freq_diff,
                  cwt[0],
                  cwt[1],
                  cwt[2],
                  cwt[3],
                  lempel_ziv(x)};
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw Error(ErrorKind::DegenerateEpoch, fmt::format("feature `{}` is not finite", kFeatureNames[i]));
  return v;
}

FeatureVector extract_all(const signal::Epoch& epoch) {
  if (epoch.artifact != signal::Artifact::Clean)
    throw Error(ErrorKind::InvalidArgument, "features are only extracted from clean epochs");
  return extract_all(epoch.samples);
}

}  // namespace earsleep::features
