#include "postfilter/dsp/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "postfilter/autodiff/ops.hpp"

namespace postfilter::dsp {

using ad::Shape;
using ad::Var;

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::mel_magnitude: return "msp";
    case FeatureKind::mfcc: return "mfcc";
    case FeatureKind::phase: return "phase";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "msp" || name == "mel" || name == "mel_magnitude") return FeatureKind::mel_magnitude;
  if (name == "mfcc") return FeatureKind::mfcc;
  if (name == "phase" || name == "ph") return FeatureKind::phase;
  throw ContractViolation("unknown feature kind '" + name + "' (expected msp, mfcc or phase)");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hann_window(std::size_t length) {
  if (length == 0) throw ContractViolation("hann_window: length must be positive");
  std::vector<double> w(length, 1.0);
  if (length == 1) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
  return w;
}

SignalTensor build_mel_filterbank(double sample_rate, std::size_t fft_size, std::size_t n_mels,
                                  double fmin, double fmax) {
  if (!(sample_rate > 0.0) || fft_size < 2) {
    throw ContractViolation("mel filterbank: sample_rate and fft_size must be positive");
  }
  if (n_mels < 1) throw ContractViolation("mel filterbank: n_mels must be at least 1");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
    throw ContractViolation("mel filterbank: need 0 <= fmin < fmax <= sample_rate/2, got fmin=" +
                            std::to_string(fmin) + " fmax=" + std::to_string(fmax));
  }
  const std::size_t bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }
  edges.front() = fmin;
  edges.back() = fmax;

  SignalTensor fb(Shape{n_mels, bins});
  const double bin_hz = sample_rate / static_cast<double>(fft_size);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    double peak = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      double v = 0.0;
      if (f > lo && f <= centre) {
        v = (f - lo) / (centre - lo);
      } else if (f > centre && f < hi) {
        v = (hi - f) / (hi - centre);
      }
      fb[m * bins + k] = v;
      peak = std::max(peak, v);
    }
    if (peak <= 0.0) {
      throw ContractViolation("mel filterbank: filter " + std::to_string(m) +
                              " covers no FFT bin; reduce n_mels or raise fft_size");
    }
    for (std::size_t k = 0; k < bins; ++k) fb[m * bins + k] /= peak;
  }
  return fb;
}

SignalTensor dct2_matrix(std::size_t n, std::size_t n_keep) {
  if (n_keep < 1 || n_keep > n) {
    throw ContractViolation("dct2: need 1 <= n_keep <= N, got n_keep=" + std::to_string(n_keep) +
                            " N=" + std::to_string(n));
  }
  SignalTensor m(Shape{n_keep, n});
  const double nd = static_cast<double>(n);
  for (std::size_t k = 0; k < n_keep; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / nd) : std::sqrt(2.0 / nd);
    for (std::size_t i = 0; i < n; ++i) {
      m[k * n + i] =
          s * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) * static_cast<double>(k) / nd);
    }
  }
  return m;
}

std::vector<double> dct2(std::span<const double> input, std::size_t n_keep) {
  const SignalTensor m = dct2_matrix(input.size(), n_keep);
  std::vector<double> out(n_keep, 0.0);
  for (std::size_t k = 0; k < n_keep; ++k)
    for (std::size_t i = 0; i < input.size(); ++i) out[k] += m[k * input.size() + i] * input[i];
  return out;
}

std::size_t frame_count(std::size_t length, std::size_t frame_len, std::size_t hop) {
  if (length < frame_len) {
    throw ContractViolation("frame count: signal length " + std::to_string(length) +
                            " is shorter than frame_len " + std::to_string(frame_len));
  }
  return (length - frame_len) / hop + 1;
}

std::vector<double> FeatureTrack::row(std::size_t coefficient) const {
  const std::size_t n = frames();
  auto v = values.values().subspan(coefficient * n, n);
  return {v.begin(), v.end()};
}

SpectralFrontend::SpectralFrontend(FrontendConfig config) : config_(config) {
  if (config_.fmax <= 0.0) config_.fmax = config_.sample_rate / 2.0;
  if (config_.frame_len < 2 || config_.hop < 1) {
    throw ContractViolation("frontend: frame_len must be >= 2 and hop >= 1");
  }
  if (config_.fft_size < config_.frame_len) {
    throw ContractViolation("frontend: fft_size " + std::to_string(config_.fft_size) +
                            " is smaller than frame_len " + std::to_string(config_.frame_len));
  }
  window_ = hann_window(config_.frame_len);
  const std::size_t bins = config_.fft_size / 2 + 1;
  const std::size_t len = config_.frame_len;
  dft_real_ = SignalTensor(Shape{bins, len});
  dft_imag_ = SignalTensor(Shape{bins, len});
  windowed_real_ = SignalTensor(Shape{bins, len});
  windowed_imag_ = SignalTensor(Shape{bins, len});
  for (std::size_t k = 0; k < bins; ++k) {
    for (std::size_t n = 0; n < len; ++n) {
      // Reduce k*n modulo fft_size so the angle stays in [0, 2 pi).
      const std::size_t phase = (k * n) % config_.fft_size;
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>(phase) / static_cast<double>(config_.fft_size);
      dft_real_[k * len + n] = std::cos(angle);
      dft_imag_[k * len + n] = -std::sin(angle);
      windowed_real_[k * len + n] = dft_real_[k * len + n] * window_[n];
      windowed_imag_[k * len + n] = dft_imag_[k * len + n] * window_[n];
    }
  }
  mel_fb_ = build_mel_filterbank(config_.sample_rate, config_.fft_size, config_.n_mels, config_.fmin,
                                 config_.fmax);
  if (config_.kind == FeatureKind::mfcc) dct_ = dct2_matrix(config_.n_mels, config_.n_ceps);
}

std::size_t SpectralFrontend::coefficient_count() const noexcept {
  switch (config_.kind) {
    case FeatureKind::mel_magnitude: return config_.n_mels;
    case FeatureKind::mfcc: return config_.n_ceps;
    case FeatureKind::phase: return config_.fft_size / 2 + 1;
  }
  return 0;
}

std::size_t SpectralFrontend::frame_count(std::size_t length) const {
  return dsp::frame_count(length, config_.frame_len, config_.hop);
}

Var SpectralFrontend::apply(Var wave) const {
  ad::Graph& g = wave.graph();
  const auto& shape = wave.shape();
  const std::size_t batch = shape.size() == 3 ? shape[0] : 1;
  Var frames = ad::frame(wave, config_.frame_len, config_.hop);
  Var re = ad::matmul(g.reference(windowed_real_), frames);
  Var im = ad::matmul(g.reference(windowed_imag_), frames);
  Var features;
  if (config_.kind == FeatureKind::phase) {
    features = ad::atan2(im, re, config_.magnitude_eps);
  } else {
    Var mel = ad::matmul(g.reference(mel_fb_), ad::magnitude(re, im, config_.magnitude_eps));
    if (config_.kind == FeatureKind::mfcc) {
      features = ad::matmul(g.reference(dct_), ad::log(mel, config_.log_floor));
    } else if (config_.log_mel) {
      features = ad::log(mel, config_.log_floor);
    } else {
      features = mel;
    }
  }
  return ad::batch_major(features, batch);
}

FeatureTrack SpectralFrontend::analyze(std::span<const double> wave) const {
  if (wave.size() < config_.frame_len) {
    throw ContractViolation("frontend: signal length " + std::to_string(wave.size()) +
                            " is shorter than frame_len " + std::to_string(config_.frame_len));
  }
  ad::Graph g;
  Var x = g.constant(SignalTensor(Shape{1, wave.size()}, std::vector<double>(wave.begin(), wave.end())));
  Var out = apply(x);
  FeatureTrack track;
  const std::size_t coeff = out.shape()[1];
  const std::size_t frames = out.shape()[2];
  track.values = out.value().reshaped(Shape{coeff, frames});
  track.frame_rate = frame_rate();
  track.kind = config_.kind;
  return track;
}

}  // namespace postfilter::dsp
