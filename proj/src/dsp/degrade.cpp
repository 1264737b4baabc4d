#include "postfilter/dsp/degrade.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "postfilter/autodiff/tensor.hpp"
#include "postfilter/dsp/fft.hpp"
#include "postfilter/dsp/frontend.hpp"

namespace postfilter::dsp {

std::vector<double> lowpass_taps(double cutoff_hz, double sample_rate, std::size_t taps) {
  if (taps % 2 == 0 || taps < 3) throw ContractViolation("lowpass: tap count must be odd and >= 3");
  if (!(cutoff_hz > 0.0 && cutoff_hz <= sample_rate / 2.0)) {
    throw ContractViolation("lowpass: cutoff must lie in (0, sample_rate/2]");
  }
  const double fc = cutoff_hz / sample_rate;
  const double mid = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  // Only the first half is evaluated so the taps mirror exactly.
  for (std::size_t n = 0; n <= taps / 2; ++n) {
    const double m = static_cast<double>(n) - mid;
    const double sinc = m == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / (taps - 1));
    h[n] = sinc * window;
    h[taps - 1 - n] = h[n];
  }
  double total = 0.0;
  for (double v : h) total += v;
  for (double& v : h) v /= total;
  return h;
}

std::vector<double> fir_filter_centered(std::span<const double> signal, std::span<const double> taps) {
  const long half = static_cast<long>(taps.size() / 2);
  const long n = static_cast<long>(signal.size());
  std::vector<double> out(signal.size(), 0.0);
  for (long t = 0; t < n; ++t) {
    double acc = 0.0;
    for (long k = 0; k < static_cast<long>(taps.size()); ++k) {
      const long src = t + half - k;
      if (src >= 0 && src < n) acc += taps[static_cast<std::size_t>(k)] * signal[static_cast<std::size_t>(src)];
    }
    out[static_cast<std::size_t>(t)] = acc;
  }
  return out;
}

std::vector<double> lowpass(std::span<const double> signal, double cutoff_hz, double sample_rate,
                            std::size_t taps) {
  const auto h = lowpass_taps(cutoff_hz, sample_rate, taps);
  return fir_filter_centered(signal, h);
}

std::vector<double> smooth_spectral(std::span<const double> signal, const SmoothingOptions& o) {
  if (o.width % 2 == 0) throw ContractViolation("smooth_spectral: width must be odd");
  if (signal.size() < o.frame_len) throw ContractViolation("smooth_spectral: signal shorter than one frame");
  const std::size_t frames = frame_count(signal.size(), o.frame_len, o.hop);
  const std::size_t bins = o.frame_len / 2 + 1;
  const auto window = hann_window(o.frame_len);

  std::vector<std::vector<std::complex<double>>> spec(frames);
  std::vector<double> seg(o.frame_len);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t n = 0; n < o.frame_len; ++n) seg[n] = signal[f * o.hop + n] * window[n];
    spec[f] = rfft(seg, o.frame_len);
  }
  const std::size_t half = o.width / 2;
  std::vector<double> out(signal.size(), 0.0);
  std::vector<double> norm(signal.size(), 0.0);
  std::vector<std::complex<double>> smoothed(bins);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t lo = f >= half ? f - half : 0;
    const std::size_t hi = std::min(frames - 1, f + half);
    for (std::size_t k = 0; k < bins; ++k) {
      double mag = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) mag += std::abs(spec[j][k]);
      mag /= static_cast<double>(hi - lo + 1);
      smoothed[k] = std::polar(mag, std::arg(spec[f][k]));
    }
    const auto frame = irfft(smoothed, o.frame_len);
    for (std::size_t n = 0; n < o.frame_len; ++n) {
      out[f * o.hop + n] += frame[n] * window[n];
      norm[f * o.hop + n] += window[n] * window[n];
    }
  }
  // Samples no frame reaches (or only the window's zero tips) pass through.
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = norm[t] > 1e-3 ? out[t] / norm[t] : signal[t];
  return out;
}

}  // namespace postfilter::dsp
