#include "earsleep/signal.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "earsleep/error.hpp"

namespace earsleep::signal {

using cplx = std::complex<double>;

void validate(const Recording& rec) {
  if (rec.t_ms.size() != rec.uv.size())
    throw Error(ErrorKind::InvalidArgument, "timestamp and value columns differ in length");
  if (rec.size() < 2) throw Error(ErrorKind::EmptyRecording, "recording has fewer than 2 samples");
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (!std::isfinite(rec.uv[i]) || !std::isfinite(rec.t_ms[i]))
      throw Error(ErrorKind::NonFiniteSample, fmt::format("sample {} is not finite", i));
    if (i > 0 && !(rec.t_ms[i] > rec.t_ms[i - 1]))
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("timestamps not strictly increasing at sample {}", i));
  }
}

void validate(const Hypnogram& hyp) {
  for (std::size_t i = 1; i < hyp.entries.size(); ++i) {
    if (hyp.entries[i].start_ms < hyp.entries[i - 1].start_ms + kEpochMs)
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("hypnogram entry {} overlaps its predecessor", i));
  }
}

std::string_view to_string(Artifact a) {
  switch (a) {
    case Artifact::Clean: return "clean";
    case Artifact::AmplitudeExceeded: return "amplitude";
    case Artifact::LowVariance: return "low_variance";
  }
  return "?";
}

// ---------------------------------------------------------------------------

Recording resample(const Recording& rec, double target_rate_hz) {
  if (!(target_rate_hz > 0.0) || !std::isfinite(target_rate_hz))
    throw Error(ErrorKind::InvalidArgument, "target rate must be positive");
  validate(rec);

  const double step = 1000.0 / target_rate_hz;
  const double t0 = rec.t_ms.front();
  const auto n_out = static_cast<std::size_t>(std::floor(rec.span_ms() / step + 1e-9)) + 1;

  Recording out;
  out.participant_id = rec.participant_id;
  out.night_index = rec.night_index;
  out.nominal_rate = target_rate_hz;
  out.t_ms.resize(n_out);
  out.uv.resize(n_out);

  std::size_t j = 0;
  for (std::size_t k = 0; k < n_out; ++k) {
    const double t = t0 + static_cast<double>(k) * step;
    while (j + 2 < rec.size() && rec.t_ms[j + 1] < t) ++j;
    const double ta = rec.t_ms[j], tb = rec.t_ms[j + 1];
    const double w = std::clamp((t - ta) / (tb - ta), 0.0, 1.0);
    out.t_ms[k] = t;
    out.uv[k] = rec.uv[j] + w * (rec.uv[j + 1] - rec.uv[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

cplx section_response(const Biquad& q, cplx z) {
  const cplx zi = 1.0 / z;
  return (q.b0 + zi * (q.b1 + zi * q.b2)) / (1.0 + zi * (q.a1 + zi * q.a2));
}

Biquad section_from_poles(cplx p1, cplx p2) {
  // Numerator (1 - z^-1)(1 + z^-1): one zero at DC, one at Nyquist.
  Biquad q{1.0, 0.0, -1.0, -(p1 + p2).real(), (p1 * p2).real()};
  return q;
}

}  // namespace

Sos design_bandpass(const FilterSpec& spec) {
  const double fs = spec.sample_rate_hz;
  if (!(fs > 0.0)) throw Error(ErrorKind::InvalidArgument, "sample rate must be positive");
  if (!(spec.low_cut_hz > 0.0 && spec.low_cut_hz < spec.high_cut_hz && spec.high_cut_hz < fs / 2))
    throw Error(ErrorKind::InvalidCutoff,
                fmt::format("need 0 < low ({}) < high ({}) < Nyquist ({})", spec.low_cut_hz,
                            spec.high_cut_hz, fs / 2));
  if (spec.order < 1 || spec.order > 16)
    throw Error(ErrorKind::InvalidArgument, fmt::format("unsupported filter order {}", spec.order));

  const int n = spec.order;
  const double pi = std::numbers::pi;
  const double w_lo = 2.0 * fs * std::tan(pi * spec.low_cut_hz / fs);
  const double w_hi = 2.0 * fs * std::tan(pi * spec.high_cut_hz / fs);
  const double w0_sq = w_lo * w_hi;
  const double bw = w_hi - w_lo;

  // Lowpass prototype poles on the left unit semicircle, mapped through the
  // lowpass-to-bandpass substitution and then the bilinear transform.
  std::vector<cplx> zpoles;
  zpoles.reserve(2 * n);
  for (int m = -n + 1; m <= n - 1; m += 2) {
    const cplx p = -std::exp(cplx(0.0, pi * m / (2.0 * n)));
    const cplx disc = std::sqrt(p * p * bw * bw - 4.0 * w0_sq);
    for (cplx s : {(p * bw + disc) / 2.0, (p * bw - disc) / 2.0})
      zpoles.push_back((2.0 * fs + s) / (2.0 * fs - s));
  }

  std::vector<cplx> upper, real;
  for (cplx z : zpoles) {
    if (std::abs(z.imag()) < 1e-12 * std::max(1.0, std::abs(z)))
      real.push_back(z.real());
    else if (z.imag() > 0)
      upper.push_back(z);
  }
  std::sort(real.begin(), real.end(), [](cplx a, cplx b) { return a.real() < b.real(); });

  Sos sos;
  for (cplx z : upper) sos.push_back(section_from_poles(z, std::conj(z)));
  for (std::size_t i = 0; i + 1 < real.size(); i += 2) sos.push_back(section_from_poles(real[i], real[i + 1]));
  if (static_cast<int>(sos.size()) != n)
    throw Error(ErrorKind::InvalidArgument, "pole pairing failed for this cutoff configuration");

  // Unit gain per section at the digital image of the analog center frequency.
  const double w_center = 2.0 * std::atan(std::sqrt(w0_sq) / (2.0 * fs));
  const cplx z_center = std::exp(cplx(0.0, w_center));
  for (auto& q : sos) {
    const double g = 1.0 / std::abs(section_response(q, z_center));
    q.b0 *= g;
    q.b1 *= g;
    q.b2 *= g;
  }
  return sos;
}

std::complex<double> frequency_response(const Sos& sos, double freq_hz, double sample_rate_hz) {
  const cplx z = std::exp(cplx(0.0, 2.0 * std::numbers::pi * freq_hz / sample_rate_hz));
  cplx h = 1.0;
  for (const auto& q : sos) h *= section_response(q, z);
  return h;
}

std::vector<std::complex<double>> poles(const Sos& sos) {
  std::vector<cplx> out;
  for (const auto& q : sos) {
    const cplx disc = std::sqrt(cplx(q.a1 * q.a1 - 4.0 * q.a2));
    out.push_back((-q.a1 + disc) / 2.0);
    out.push_back((-q.a1 - disc) / 2.0);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct SectionState {
  double s1 = 0.0, s2 = 0.0;
};

void run_cascade(std::vector<double>& x, const Sos& sos, std::vector<SectionState> state) {
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const Biquad& q = sos[k];
    double s1 = state[k].s1, s2 = state[k].s2;
    for (double& v : x) {
      const double y = q.b0 * v + s1;
      s1 = q.b1 * v - q.a1 * y + s2;
      s2 = q.b2 * v - q.a2 * y;
      v = y;
    }
  }
}

// Direct-form-II-transposed state that makes each section start in steady
// state for a constant input of `level`.
std::vector<SectionState> steady_state(const Sos& sos, double level) {
  std::vector<SectionState> st(sos.size());
  double u = level;
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const Biquad& q = sos[k];
    const double h = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    st[k].s2 = (q.b2 - q.a2 * h) * u;
    st[k].s1 = (q.b1 - q.a1 * h) * u + st[k].s2;
    u *= h;
  }
  return st;
}

void check_finite(std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      throw Error(ErrorKind::NonFiniteSample, fmt::format("input sample {} is not finite", i));
}

}  // namespace

std::vector<double> apply_filter(std::span<const double> x, const Sos& sos, PhaseMode mode) {
  check_finite(x);
  if (mode == PhaseMode::Causal || x.size() < 2) {
    std::vector<double> y(x.begin(), x.end());
    run_cascade(y, sos, std::vector<SectionState>(sos.size()));
    return y;
  }

  // Forward-backward pass with odd extension and steady-state initial
  // conditions at both ends.
  const std::size_t n = x.size();
  const std::size_t pad = std::min<std::size_t>(3 * (2 * sos.size() + 1), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  run_cascade(ext, sos, steady_state(sos, ext.front()));
  std::reverse(ext.begin(), ext.end());
  run_cascade(ext, sos, steady_state(sos, ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::vector<double> apply_filter(std::span<const double> x, const FilterSpec& spec) {
  return apply_filter(x, design_bandpass(spec), spec.phase_mode);
}

// ---------------------------------------------------------------------------

std::vector<Epoch> segment(const Recording& rec, const Hypnogram& hyp) {
  if (rec.size() < 2) throw Error(ErrorKind::EmptyRecording, "recording has fewer than 2 samples");
  if (hyp.entries.empty()) throw Error(ErrorKind::NoOverlap, "hypnogram is empty");
  validate(hyp);

  const double rate = rec.nominal_rate;
  const double period = 1000.0 / rate;
  const auto epoch_len = static_cast<std::size_t>(std::llround(30.0 * rate));
  const double t0 = rec.t_ms.front();
  const double t_last = rec.t_ms.back();
  if (static_cast<double>(hyp.end_ms()) <= t0 || static_cast<double>(hyp.begin_ms()) > t_last)
    throw Error(ErrorKind::NoOverlap, "recording and hypnogram do not overlap in time");

  const auto& entries = hyp.entries;
  const std::int64_t begin = hyp.begin_ms();
  const auto n_slots = static_cast<std::size_t>((hyp.end_ms() - begin + kEpochMs - 1) / kEpochMs);

  std::vector<Epoch> epochs;
  std::size_t first_entry = 0;
  for (std::size_t slot = 0; slot < n_slots; ++slot) {
    const std::int64_t s0 = begin + static_cast<std::int64_t>(slot) * kEpochMs;
    const std::int64_t s1 = s0 + kEpochMs;

    const double pos = (static_cast<double>(s0) - t0) / period;
    if (pos < -1e-6) continue;
    const auto i0 = static_cast<std::size_t>(std::ceil(pos - 1e-6));
    if (i0 + epoch_len > rec.size()) break;

    while (first_entry < entries.size() && entries[first_entry].start_ms + kEpochMs <= s0) ++first_entry;

    std::array<std::int64_t, 4> overlap{};
    std::array<std::int64_t, 4> first_seen;
    first_seen.fill(s1);
    for (std::size_t e = first_entry; e < entries.size() && entries[e].start_ms < s1; ++e) {
      const std::int64_t lo = std::max(s0, entries[e].start_ms);
      const std::int64_t hi = std::min(s1, entries[e].start_ms + kEpochMs);
      if (hi <= lo) continue;
      const auto k = static_cast<std::size_t>(entries[e].stage);
      overlap[k] += hi - lo;
      first_seen[k] = std::min(first_seen[k], lo);
    }
    std::int64_t covered = 0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      covered += overlap[k];
      if (overlap[k] > overlap[best] || (overlap[k] == overlap[best] && first_seen[k] < first_seen[best]))
        best = k;
    }
    if (2 * covered < kEpochMs) continue;

    Epoch ep;
    ep.start_ms = s0;
    ep.index = slot;
    ep.label = static_cast<SleepStage>(best);
    ep.samples.assign(rec.uv.begin() + static_cast<std::ptrdiff_t>(i0),
                      rec.uv.begin() + static_cast<std::ptrdiff_t>(i0 + epoch_len));
    epochs.push_back(std::move(ep));
  }
  return epochs;
}

Artifact classify_artifact(std::span<const double> samples, const RejectionLimits& limits) {
  double sum = 0.0;
  for (double v : samples) {
    if (std::abs(v) > limits.amp_limit_uv) return Artifact::AmplitudeExceeded;
    sum += v;
  }
  if (samples.empty()) return Artifact::LowVariance;
  const double mean = sum / static_cast<double>(samples.size());
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  if (ss / static_cast<double>(samples.size()) < limits.var_floor_uv2) return Artifact::LowVariance;
  return Artifact::Clean;
}

void reject_artifacts(std::vector<Epoch>& epochs, const RejectionLimits& limits) {
  for (auto& ep : epochs) ep.artifact = classify_artifact(ep.samples, limits);
}

RejectionSummary summarize(const std::vector<Epoch>& epochs) {
  RejectionSummary s;
  for (const auto& ep : epochs) {
    switch (ep.artifact) {
      case Artifact::Clean: ++s.clean; break;
      case Artifact::AmplitudeExceeded: ++s.amplitude; break;
      case Artifact::LowVariance: ++s.low_variance; break;
    }
  }
  return s;
}

}  // namespace earsleep::signal
