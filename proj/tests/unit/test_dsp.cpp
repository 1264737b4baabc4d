#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "postfilter/autodiff/grad_check.hpp"
#include "postfilter/autodiff/ops.hpp"
#include "postfilter/dsp/fft.hpp"
#include "postfilter/dsp/frontend.hpp"

using namespace postfilter;
using namespace postfilter::dsp;
using ad::Graph;
using ad::Shape;
using ad::Var;

namespace {

FrontendConfig small_config(FeatureKind kind) {
  FrontendConfig c;
  c.sample_rate = 8000.0;
  c.frame_len = 32;
  c.hop = 8;
  c.fft_size = 32;
  c.n_mels = 6;
  c.n_ceps = 4;
  c.kind = kind;
  return c;
}

std::vector<double> sine(double hz, double sr, std::size_t n, double amp = 0.5) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / sr);
  return v;
}

}  // namespace

TEST(Mel, ScaleFormula) {
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-12);
  EXPECT_NEAR(hz_to_mel(700.0), 781.17, 0.01);
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Mel, SingleFilterSpansBand) {
  const auto fb = build_mel_filterbank(16000.0, 512, 1, 0.0, 8000.0);
  ASSERT_EQ(fb.shape(), (Shape{1, 257}));
  EXPECT_EQ(fb[0], 0.0);
  EXPECT_EQ(fb[256], 0.0);
  double peak = 0.0;
  for (std::size_t k = 1; k < 256; ++k) {
    EXPECT_GT(fb[k], 0.0) << k;
    peak = std::max(peak, fb[k]);
  }
  EXPECT_DOUBLE_EQ(peak, 1.0);
}

TEST(Mel, FiltersAreTriangularAndTileTheAxis) {
  const double sr = 22050.0;
  const std::size_t fft = 1024, n_mels = 80, bins = fft / 2 + 1;
  const auto fb = build_mel_filterbank(sr, fft, n_mels, 0.0, sr / 2);
  // Centres recomputed directly from the mel formula.
  std::vector<double> centres(n_mels);
  const double top = 2595.0 * std::log10(1.0 + (sr / 2) / 700.0);
  for (std::size_t m = 0; m < n_mels; ++m)
    centres[m] = 700.0 * (std::pow(10.0, top * (m + 1) / (n_mels + 1) / 2595.0) - 1.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    double row_sum = 0.0, peak = 0.0;
    std::size_t argmax = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double v = fb[m * bins + k];
      EXPECT_GE(v, 0.0);
      row_sum += v;
      if (v > peak) {
        peak = v;
        argmax = k;
      }
    }
    EXPECT_GT(row_sum, 0.0);
    EXPECT_DOUBLE_EQ(peak, 1.0);
    // Rising to the peak and falling after it.
    for (std::size_t k = 1; k <= argmax; ++k) EXPECT_GE(fb[m * bins + k], fb[m * bins + k - 1]);
    for (std::size_t k = argmax + 1; k < bins; ++k) EXPECT_LE(fb[m * bins + k], fb[m * bins + k - 1]);
    if (m > 0) {
      EXPECT_GT(centres[m], centres[m - 1]);
    }
  }
  const double bin_hz = sr / fft;
  for (std::size_t m = 0; m + 1 < n_mels; ++m) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      if (!(f > centres[m] && f < centres[m + 1])) continue;
      for (std::size_t j = 0; j < n_mels; ++j) {
        if (j == m || j == m + 1) {
          EXPECT_GT(fb[j * bins + k], 0.0);
        } else {
          EXPECT_EQ(fb[j * bins + k], 0.0);
        }
      }
    }
  }
}

TEST(Mel, RejectsInvalidBandEdges) {
  EXPECT_THROW(build_mel_filterbank(16000.0, 512, 10, 4000.0, 2000.0), ContractViolation);
  EXPECT_THROW(build_mel_filterbank(16000.0, 512, 10, 0.0, 9000.0), ContractViolation);
  EXPECT_THROW(build_mel_filterbank(16000.0, 512, 0, 0.0, 8000.0), ContractViolation);
}

TEST(Dct, ConstantInputHasOnlyDcCoefficient) {
  const auto c = dct2(std::vector<double>(16, 2.5), 16);
  EXPECT_NEAR(c[0], 2.5 * 4.0, 1e-12);
  for (std::size_t k = 1; k < 16; ++k) EXPECT_NEAR(c[k], 0.0, 1e-12);
}

TEST(Dct, BasisVectorGivesCosineColumn) {
  const std::size_t n = 12, j = 5;
  std::vector<double> e(n, 0.0);
  e[j] = 1.0;
  const auto c = dct2(e, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    EXPECT_NEAR(c[k], s * std::cos(std::numbers::pi * (j + 0.5) * k / n), 1e-14);
  }
}

TEST(Dct, TransposeInvertsFullLengthTransform) {
  std::mt19937_64 rng(3);
  const auto x = oracle::random_vector(rng, 40);
  const auto m = dct2_matrix(40, 40);
  const auto c = dct2(x, 40);
  for (std::size_t i = 0; i < 40; ++i) {
    double back = 0.0;
    for (std::size_t k = 0; k < 40; ++k) back += m[k * 40 + i] * c[k];
    EXPECT_NEAR(back, x[i], 1e-10);
  }
  EXPECT_THROW(dct2(x, 41), ContractViolation);
  EXPECT_THROW(dct2(x, 0), ContractViolation);
}

TEST(Frontend, HannWindowIsSymmetric) {
  const auto w = hann_window(1024);
  EXPECT_EQ(w[0], 0.0);
  for (std::size_t n = 0; n < 1024; ++n) EXPECT_NEAR(w[n], w[1023 - n], 1e-15);
  EXPECT_NEAR(w[1023], 0.0, 1e-15);
}

TEST(Frontend, DftMatricesSatisfyParseval) {
  SpectralFrontend fe(FrontendConfig{});
  std::mt19937_64 rng(11);
  const std::size_t len = 1024, bins = 513;
  const auto x = oracle::random_vector(rng, len);
  std::vector<double> xw(len);
  double energy = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    xw[n] = x[n] * fe.window()[n];
    energy += xw[n] * xw[n];
  }
  double spec = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      re += fe.dft_real()[k * len + n] * xw[n];
      im += fe.dft_imag()[k * len + n] * xw[n];
    }
    const double weight = (k == 0 || k == bins - 1) ? 1.0 : 2.0;
    spec += weight * (re * re + im * im);
  }
  EXPECT_NEAR(spec / len, energy, 1e-9 * energy);
}

TEST(Frontend, FrameCountHasNoCentring) {
  SpectralFrontend fe(FrontendConfig{});
  EXPECT_EQ(fe.frame_count(1024), 1u);
  EXPECT_EQ(fe.frame_count(1279), 1u);
  EXPECT_EQ(fe.frame_count(1280), 2u);
  EXPECT_EQ(fe.frame_count(16384), (16384u - 1024u) / 256u + 1u);
  EXPECT_THROW(fe.frame_count(1023), ContractViolation);
  EXPECT_THROW(fe.analyze(std::vector<double>(1000, 0.0)), ContractViolation);
}

TEST(Frontend, MelMagnitudeMatchesBruteForceDft) {
  FrontendConfig cfg;
  SpectralFrontend fe(cfg);
  std::mt19937_64 rng(5);
  const auto x = oracle::random_vector(rng, 3000, 0.2);
  const auto track = fe.analyze(x);
  ASSERT_EQ(track.frames(), fe.frame_count(3000));
  ASSERT_EQ(track.coefficients(), 80u);
  const auto window = oracle::hann(1024);
  const auto& fb = fe.mel_filterbank();
  for (std::size_t f = 0; f < track.frames(); ++f) {
    std::vector<double> seg(1024);
    for (std::size_t n = 0; n < 1024; ++n) seg[n] = x[f * 256 + n] * window[n];
    const auto spec = oracle::dft(seg, 1024);
    for (std::size_t m = 0; m < 80; m += 7) {
      double expected = 0.0;
      for (std::size_t k = 0; k < 513; ++k)
        expected += fb[m * 513 + k] * std::sqrt(std::norm(spec[k]) + 1e-12);
      EXPECT_NEAR(track.values[m * track.frames() + f], expected, 1e-9 * (1.0 + expected));
    }
  }
}

TEST(Frontend, ZeroInputGivesEpsilonScaleMelAndConstantLogMfcc) {
  FrontendConfig cfg;
  SpectralFrontend mel(cfg);
  const auto track = mel.analyze(std::vector<double>(2048, 0.0));
  for (double v : track.values.values()) EXPECT_LT(v, 1e-4);
  cfg.kind = FeatureKind::mfcc;
  SpectralFrontend mfcc(cfg);
  const auto c = mfcc.analyze(std::vector<double>(2048, 0.0));
  const auto expected = dct2(std::vector<double>(80, std::log(cfg.log_floor)), 25);
  for (std::size_t f = 0; f < c.frames(); ++f)
    for (std::size_t k = 0; k < 25; ++k) EXPECT_NEAR(c.values[k * c.frames() + f], expected[k], 1e-9);
}

TEST(Frontend, SineAtFilterCentreLandsInThatBand) {
  FrontendConfig cfg;
  SpectralFrontend fe(cfg);
  const double top = hz_to_mel(cfg.sample_rate / 2);
  for (std::size_t target : {20u, 40u, 60u}) {
    const double centre = mel_to_hz(top * (target + 1) / 81.0);
    const auto track = fe.analyze(sine(centre, cfg.sample_rate, 4096));
    for (std::size_t f = 0; f < track.frames(); ++f) {
      std::size_t best = 0;
      for (std::size_t m = 1; m < 80; ++m)
        if (track.values[m * track.frames() + f] > track.values[best * track.frames() + f]) best = m;
      EXPECT_EQ(best, target) << "frame " << f;
    }
  }
}

TEST(Frontend, MelIsHomogeneous) {
  SpectralFrontend fe(FrontendConfig{});
  std::mt19937_64 rng(9);
  const auto x = oracle::random_vector(rng, 4096, 0.3);
  auto scaled = x;
  for (double& v : scaled) v *= -2.5;
  const auto a = fe.analyze(x);
  const auto b = fe.analyze(scaled);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] < 1e-3) continue;
    EXPECT_NEAR(b.values[i], 2.5 * a.values[i], 1e-9 * b.values[i]);
  }
}

TEST(Frontend, InteriorFramesAreLocal) {
  FrontendConfig cfg = small_config(FeatureKind::mel_magnitude);
  SpectralFrontend fe(cfg);
  std::mt19937_64 rng(4);
  const auto a = oracle::random_vector(rng, 200);
  const auto b = oracle::random_vector(rng, 160);
  auto joined = a;
  joined.insert(joined.end(), b.begin(), b.end());
  const auto ta = fe.analyze(a);
  const auto tb = fe.analyze(b);
  const auto tj = fe.analyze(joined);
  const std::size_t nf = tj.frames();
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    for (std::size_t f = 0; f < ta.frames(); ++f)
      EXPECT_EQ(tj.values[m * nf + f], ta.values[m * ta.frames() + f]);
    // Frames of b start at sample 200, which is a multiple of the hop.
    for (std::size_t f = 0; f < tb.frames(); ++f)
      EXPECT_EQ(tj.values[m * nf + 25 + f], tb.values[m * tb.frames() + f]);
  }
}

TEST(Frontend, DifferentiableAndAnalysisPathsAgreeExactly) {
  for (auto kind : {FeatureKind::mel_magnitude, FeatureKind::mfcc, FeatureKind::phase}) {
    FrontendConfig cfg;
    cfg.kind = kind;
    SpectralFrontend fe(cfg);
    std::mt19937_64 rng(21);
    const auto x = oracle::random_vector(rng, 2 * 3000, 0.2);
    Graph g;
    Var out = fe.apply(g.constant(SignalTensor(Shape{2, 1, 3000}, x)));
    const std::size_t c = fe.coefficient_count();
    const std::size_t nf = fe.frame_count(3000);
    ASSERT_EQ(out.shape(), (Shape{2, c, nf}));
    for (std::size_t b = 0; b < 2; ++b) {
      const auto track = fe.analyze(std::span<const double>(x).subspan(b * 3000, 3000));
      for (std::size_t i = 0; i < c * nf; ++i) EXPECT_EQ(out.value()[b * c * nf + i], track.values[i]);
    }
  }
}

TEST(Frontend, PhaseMatchesAtan2OfDft) {
  FrontendConfig cfg = small_config(FeatureKind::phase);
  SpectralFrontend fe(cfg);
  std::mt19937_64 rng(8);
  const auto x = oracle::random_vector(rng, 64);
  const auto track = fe.analyze(x);
  const auto w = oracle::hann(32);
  for (std::size_t f = 0; f < track.frames(); ++f) {
    std::vector<double> seg(32);
    for (std::size_t n = 0; n < 32; ++n) seg[n] = x[f * 8 + n] * w[n];
    const auto spec = oracle::dft(seg, 32);
    for (std::size_t k = 1; k < 16; ++k)
      EXPECT_NEAR(track.values[k * track.frames() + f], std::arg(spec[k]), 1e-9);
  }
}

TEST(Frontend, GradCheckPasses) {
  for (auto kind : {FeatureKind::mel_magnitude, FeatureKind::mfcc, FeatureKind::phase}) {
    for (bool log_mel : {false, true}) {
      if (kind != FeatureKind::mel_magnitude && log_mel) continue;
      FrontendConfig cfg = small_config(kind);
      cfg.log_mel = log_mel;
      SpectralFrontend fe(cfg);
      std::mt19937_64 rng(13);
      SignalTensor point(Shape{2, 1, 48}, oracle::random_vector(rng, 96));
      SignalTensor weights(Shape{2, fe.coefficient_count(), fe.frame_count(48)},
                           oracle::random_vector(rng, 2 * fe.coefficient_count() * fe.frame_count(48)));
      auto f = [&](Graph& g, Var x) { return ad::sum(ad::mul(fe.apply(x), g.reference(weights))); };
      const auto r = ad::grad_check(f, point);
      EXPECT_LT(r.max_rel_error, 1e-4) << to_string(kind) << " log_mel=" << log_mel;
    }
  }
}

TEST(Fft, MatchesBruteForceAndInverts) {
  std::mt19937_64 rng(2);
  const auto x = oracle::random_vector(rng, 300);
  const auto fast = rfft(x, 512);
  const auto slow = oracle::dft(x, 512);
  ASSERT_EQ(fast.size(), 257u);
  for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_LT(std::abs(fast[k] - slow[k]), 1e-9);
  const auto back = irfft(fast, 512);
  for (std::size_t n = 0; n < 512; ++n) EXPECT_NEAR(back[n], n < 300 ? x[n] : 0.0, 1e-12);
}
