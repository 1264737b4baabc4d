#pragma once

// Independent reference implementations used only by tests. Nothing here
// shares code with the library paths they check.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

// Direct-summation 1-D convolution on a single item: x [cin][t], w [cout][cin][k].
inline std::vector<std::vector<double>> conv1d(const std::vector<std::vector<double>>& x,
                                               const std::vector<std::vector<std::vector<double>>>& w,
                                               const std::vector<double>& bias, long stride,
                                               long dilation, long padding) {
  const long cin = static_cast<long>(x.size());
  const long length = static_cast<long>(x[0].size());
  const long kernel = static_cast<long>(w[0][0].size());
  const long out_len = (length + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
  std::vector<std::vector<double>> y(w.size(), std::vector<double>(out_len, 0.0));
  for (std::size_t co = 0; co < w.size(); ++co) {
    for (long t = 0; t < out_len; ++t) {
      double acc = bias.empty() ? 0.0 : bias[co];
      for (long ci = 0; ci < cin; ++ci) {
        for (long k = 0; k < kernel; ++k) {
          const long src = t * stride + k * dilation - padding;
          if (src >= 0 && src < length) acc += w[co][ci][k] * x[ci][src];
        }
      }
      y[co][t] = acc;
    }
  }
  return y;
}

// Brute-force DFT of a real sequence, bins 0..n_fft/2, zero-padding to n_fft.
inline std::vector<std::complex<double>> dft(const std::vector<double>& x, std::size_t n_fft) {
  std::vector<std::complex<double>> out(n_fft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < std::min(n_fft, x.size()); ++n) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>((k * n) % n_fft) /
                           static_cast<double>(n_fft);
      acc += x[n] * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    out[k] = acc;
  }
  return out;
}

inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n - 1));
  return w;
}

// Frame-wise RMS log-spectral distance in dB, computed from brute-force DFTs.
inline double lsd(const std::vector<double>& a, const std::vector<double>& b, std::size_t frame_len,
                  std::size_t hop, double eps) {
  const std::size_t length = std::min(a.size(), b.size());
  const std::size_t frames = (length - frame_len) / hop + 1;
  const auto window = hann(frame_len);
  double total = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    std::vector<double> fa(frame_len), fb(frame_len);
    for (std::size_t n = 0; n < frame_len; ++n) {
      fa[n] = a[f * hop + n] * window[n];
      fb[n] = b[f * hop + n] * window[n];
    }
    const auto sa = dft(fa, frame_len);
    const auto sb = dft(fb, frame_len);
    double acc = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) {
      const double d = 20.0 * std::log10((std::abs(sa[k]) + eps) / (std::abs(sb[k]) + eps));
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(sa.size()));
  }
  return total / static_cast<double>(frames);
}

// Log power spectrum of the mean-removed sequence, brute-force DFT.
inline std::vector<double> modulation_spectrum(const std::vector<double>& track, std::size_t n_fft,
                                               double eps) {
  double mean = 0.0;
  for (double v : track) mean += v;
  mean /= static_cast<double>(track.size());
  std::vector<double> centered(track.size());
  for (std::size_t i = 0; i < track.size(); ++i) centered[i] = track[i] - mean;
  const auto spec = dft(centered, n_fft);
  std::vector<double> out(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) out[k] = 10.0 * std::log10(std::norm(spec[k]) + eps);
  return out;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace oracle
