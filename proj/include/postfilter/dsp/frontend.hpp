#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "postfilter/autodiff/graph.hpp"
#include "postfilter/autodiff/tensor.hpp"

namespace postfilter::dsp {

using ad::SignalTensor;

enum class FeatureKind { mel_magnitude, mfcc, phase };

std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& name);

struct FrontendConfig {
  double sample_rate = 22050.0;
  std::size_t frame_len = 1024;
  std::size_t hop = 256;
  std::size_t fft_size = 1024;
  std::size_t n_mels = 80;
  std::size_t n_ceps = 25;
  double fmin = 0.0;
  /// Upper band edge; 0 selects sample_rate / 2.
  double fmax = 0.0;
  FeatureKind kind = FeatureKind::mel_magnitude;
  /// Feed log(max(mel, log_floor)) instead of the mel magnitude.
  bool log_mel = false;
  double magnitude_eps = 1e-12;
  double log_floor = 1e-4;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Periodic-free symmetric Hann window: 0.5 - 0.5 cos(2 pi n / (N - 1)).
std::vector<double> hann_window(std::size_t length);

/// Triangular filters with centres uniform on the mel scale, each row
/// scaled to peak at 1.0. Returns [n_mels x fft_size/2+1].
SignalTensor build_mel_filterbank(double sample_rate, std::size_t fft_size, std::size_t n_mels,
                                  double fmin, double fmax);

/// Orthonormal DCT-II matrix keeping the first n_keep rows: [n_keep x n].
SignalTensor dct2_matrix(std::size_t n, std::size_t n_keep);

/// Orthonormal DCT-II of `input`, first n_keep coefficients.
std::vector<double> dct2(std::span<const double> input, std::size_t n_keep);

/// Frame count without centring: floor((T - frame_len) / hop) + 1.
std::size_t frame_count(std::size_t length, std::size_t frame_len, std::size_t hop);

/// Coefficient rows over frames for a single utterance.
struct FeatureTrack {
  SignalTensor values;  // [n_coeff x n_frames]
  double frame_rate = 0.0;
  FeatureKind kind = FeatureKind::mel_magnitude;

  std::size_t coefficients() const { return values.dim(0); }
  std::size_t frames() const { return values.dim(1); }
  std::vector<double> row(std::size_t coefficient) const;
};

/// Waveform -> mel / MFCC / phase frames: Hann window, DFT as explicit cos/sin
/// matrices, mel filterbank, optional DCT. Immutable after construction.
class SpectralFrontend {
 public:
  explicit SpectralFrontend(FrontendConfig config);

  const FrontendConfig& config() const noexcept { return config_; }
  FeatureKind kind() const noexcept { return config_.kind; }
  std::size_t coefficient_count() const noexcept;
  std::size_t frame_count(std::size_t length) const;
  double frame_rate() const noexcept { return config_.sample_rate / static_cast<double>(config_.hop); }

  const std::vector<double>& window() const noexcept { return window_; }
  const SignalTensor& dft_real() const noexcept { return dft_real_; }
  const SignalTensor& dft_imag() const noexcept { return dft_imag_; }
  const SignalTensor& mel_filterbank() const noexcept { return mel_fb_; }

  /// Differentiable path: [1 x T] or [B x 1 x T] -> [B x n_coeff x n_frames].
  ad::Var apply(ad::Var wave) const;

  /// Metric path for one utterance; the same arithmetic as apply().
  FeatureTrack analyze(std::span<const double> wave) const;

 private:
  FrontendConfig config_;
  std::vector<double> window_;
  SignalTensor dft_real_;  // [fft_size/2+1 x frame_len], unwindowed
  SignalTensor dft_imag_;
  SignalTensor windowed_real_;  // window folded into the columns
  SignalTensor windowed_imag_;
  SignalTensor mel_fb_;
  SignalTensor dct_;
};

}  // namespace postfilter::dsp
