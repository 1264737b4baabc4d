#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace postfilter::dsp {

/// Real-to-complex FFT, bins 0..n_fft/2. Input is zero-padded or truncated to n_fft.
std::vector<std::complex<double>> rfft(std::span<const double> signal, std::size_t n_fft);

/// Inverse of rfft for a length-n_fft real sequence (scaled by 1/n_fft).
std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n_fft);

}  // namespace postfilter::dsp
