#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace earsleep::dsp {
namespace {

// The FFTW planner is not thread-safe; plan execution on private buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Plan {
  fftw_plan plan = nullptr;
  double* real = nullptr;
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;

  Plan() = default;
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    if (plan) fftw_destroy_plan(plan);
    fftw_free(real);
    fftw_free(in);
    fftw_free(out);
  }
};

enum class Kind { RealForward, ComplexBackward };

Plan& plan_for(Kind kind, std::size_t n) {
  thread_local std::map<std::pair<Kind, std::size_t>, std::unique_ptr<Plan>> cache;
  auto& slot = cache[{kind, n}];
  if (slot) return *slot;

  slot = std::make_unique<Plan>();
  std::lock_guard lock(planner_mutex());
  const int len = static_cast<int>(n);
  if (kind == Kind::RealForward) {
    slot->real = fftw_alloc_real(n);
    slot->out = fftw_alloc_complex(n / 2 + 1);
    slot->plan = fftw_plan_dft_r2c_1d(len, slot->real, slot->out, FFTW_ESTIMATE);
  } else {
    slot->in = fftw_alloc_complex(n);
    slot->out = fftw_alloc_complex(n);
    slot->plan = fftw_plan_dft_1d(len, slot->in, slot->out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  return *slot;
}

}  // namespace

void rfft(std::span<const double> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  Plan& p = plan_for(Kind::RealForward, n);
  std::copy(in.begin(), in.end(), p.real);
  fftw_execute(p.plan);
  for (std::size_t k = 0; k < n / 2 + 1; ++k) out[k] = {p.out[k][0], p.out[k][1]};
}

void ifft(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  Plan& p = plan_for(Kind::ComplexBackward, n);
  for (std::size_t k = 0; k < n; ++k) {
    p.in[k][0] = in[k].real();
    p.in[k][1] = in[k].imag();
  }
  fftw_execute(p.plan);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = {p.out[k][0] * scale, p.out[k][1] * scale};
}

}  // namespace earsleep::dsp
