#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace postfilter::dsp {

/// Hamming-windowed sinc lowpass, normalised to unit DC gain.
std::vector<double> lowpass_taps(double cutoff_hz, double sample_rate, std::size_t taps = 63);

/// Zero-delay FIR filtering: the output is aligned with the input and has the
/// same length (zero padding at both ends).
std::vector<double> fir_filter_centered(std::span<const double> signal, std::span<const double> taps);

std::vector<double> lowpass(std::span<const double> signal, double cutoff_hz, double sample_rate,
                            std::size_t taps = 63);

struct SmoothingOptions {
  std::size_t frame_len = 1024;
  std::size_t hop = 256;
  /// Moving-average width over frames, odd.
  std::size_t width = 5;
};

/// STFT magnitudes averaged across time, recombined with the original phase
/// and overlap-added back to a waveform of the input's length.
std::vector<double> smooth_spectral(std::span<const double> signal, const SmoothingOptions& options = {});

}  // namespace postfilter::dsp
