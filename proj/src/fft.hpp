#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace earsleep::dsp {

/// Forward real FFT; `out` must hold in.size()/2 + 1 bins. Unnormalized.
void rfft(std::span<const double> in, std::span<std::complex<double>> out);

/// Backward complex FFT of length in.size(), scaled by 1/n.
void ifft(std::span<const std::complex<double>> in, std::span<std::complex<double>> out);

}  // namespace earsleep::dsp
