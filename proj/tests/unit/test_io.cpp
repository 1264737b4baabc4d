#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "postfilter/dsp/degrade.hpp"
#include "postfilter/io/files.hpp"
#include "postfilter/trainer/corpus.hpp"

using namespace postfilter;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("postfilter_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<double> noise(std::uint64_t seed, std::size_t n, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Energy of the brute-force spectrum above `hz`, summed over whole frames.
double band_energy(const std::vector<double>& x, double hz, double sr, std::size_t frame) {
  double total = 0.0;
  const auto w = oracle::hann(frame);
  for (std::size_t start = frame; start + 2 * frame <= x.size(); start += frame) {
    std::vector<double> f(frame);
    for (std::size_t n = 0; n < frame; ++n) f[n] = x[start + n] * w[n];
    const auto spec = oracle::dft(f, frame);
    for (std::size_t k = 0; k < spec.size(); ++k)
      if (static_cast<double>(k) * sr / static_cast<double>(frame) >= hz) total += std::norm(spec[k]);
  }
  return total;
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
void put(std::string& s, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  s.append(buf, sizeof(T));
}

// Hand-assembled PCM header, independent of the writer.
std::string pcm_header(std::uint16_t channels, std::uint32_t rate, std::uint16_t bits, std::uint32_t data_bytes) {
  std::string s = "RIFF";
  put<std::uint32_t>(s, 36 + data_bytes);
  s += "WAVEfmt ";
  put<std::uint32_t>(s, 16);
  put<std::uint16_t>(s, 1);
  put<std::uint16_t>(s, channels);
  put<std::uint32_t>(s, rate);
  put<std::uint32_t>(s, rate * channels * bits / 8);
  put<std::uint16_t>(s, static_cast<std::uint16_t>(channels * bits / 8));
  put<std::uint16_t>(s, bits);
  s += "data";
  put<std::uint32_t>(s, data_bytes);
  return s;
}

}  // namespace

TEST(Wav, Float32RoundTrip) {
  const auto dir = scratch("f32");
  const auto x = noise(1, 1000, 0.9);
  io::write_wav(dir / "a.wav", x, 22050);
  const auto w = io::read_wav(dir / "a.wav");
  EXPECT_EQ(w.sample_rate, 22050u);
  EXPECT_EQ(w.format, io::SampleFormat::float32);
  ASSERT_EQ(w.samples.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(w.samples[i], static_cast<double>(static_cast<float>(x[i])));
}

TEST(Wav, Pcm16RoundTripWithinOneStep) {
  const auto dir = scratch("pcm");
  const auto x = noise(2, 1000, 0.99);
  io::write_wav(dir / "a.wav", x, 16000, io::SampleFormat::pcm16);
  const auto w = io::read_wav(dir / "a.wav");
  EXPECT_EQ(w.format, io::SampleFormat::pcm16);
  EXPECT_EQ(w.sample_rate, 16000u);
  ASSERT_EQ(w.samples.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(w.samples[i] - x[i]), 1.0 / 32767.0);
}

TEST(Wav, ReadsHandWrittenPcm) {
  const auto dir = scratch("hand");
  std::string bytes = pcm_header(1, 8000, 16, 6);
  put<std::int16_t>(bytes, 0);
  put<std::int16_t>(bytes, 16384);
  put<std::int16_t>(bytes, -32768);
  write_bytes(dir / "h.wav", bytes);
  const auto w = io::read_wav(dir / "h.wav");
  ASSERT_EQ(w.samples.size(), 3u);
  EXPECT_EQ(w.samples[0], 0.0);
  EXPECT_EQ(w.samples[1], 0.5);
  EXPECT_EQ(w.samples[2], -1.0);
}

TEST(Wav, RejectsMultichannelAndGarbage) {
  const auto dir = scratch("bad");
  std::string stereo = pcm_header(2, 8000, 16, 8);
  for (int i = 0; i < 4; ++i) put<std::int16_t>(stereo, 0);
  write_bytes(dir / "stereo.wav", stereo);
  EXPECT_THROW(io::read_wav(dir / "stereo.wav"), io::IoError);
  write_bytes(dir / "junk.wav", "not a wav file at all");
  EXPECT_THROW(io::read_wav(dir / "junk.wav"), io::IoError);
  EXPECT_THROW(io::read_wav(dir / "missing.wav"), io::IoError);
}

TEST(Csv, RoundTripAndShortestDoubles) {
  const auto dir = scratch("csv");
  io::CsvTable t({"utterance_id", "value"});
  const double v = 0.1 + 0.2;
  t.add_row({"utt000", io::format_double(v)});
  t.add_row({"AGGREGATE", io::format_double(-1.5e-300)});
  t.save(dir / "t.csv");
  const auto back = io::read_csv(dir / "t.csv");
  EXPECT_EQ(back.header(), t.header());
  ASSERT_EQ(back.rows().size(), 2u);
  EXPECT_EQ(std::stod(back.rows()[0][1]), v);
  EXPECT_EQ(std::stod(back.rows()[1][1]), -1.5e-300);
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_THROW(t.add_row({"only-one-cell"}), std::exception);
}

TEST(Csv, ReaderNamesTheBadLine) {
  const auto dir = scratch("csvbad");
  write_bytes(dir / "b.csv", "a,b\n1,2\n3\n");
  try {
    io::read_csv(dir / "b.csv");
    FAIL();
  } catch (const io::IoError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(Files, AtomicWriteReplacesWholeFile) {
  const auto dir = scratch("atomic");
  io::write_atomic(dir / "sub" / "f.txt", "first version, long");
  io::write_atomic(dir / "sub" / "f.txt", "second");
  EXPECT_EQ(io::read_file(dir / "sub" / "f.txt"), "second");
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(dir / "sub")) {
    (void)e;
    ++entries;
  }
  EXPECT_EQ(entries, 1u);
}

TEST(Corpus, SaveLoadKeepsIdsAndSamples) {
  const auto dir = scratch("corpus");
  trainer::SynthOptions opts;
  opts.sample_rate = 8000.0;
  opts.seconds = 0.25;
  const auto c = trainer::synthesize_corpus(3, 4, opts);
  c.save(dir);
  const auto back = trainer::Corpus::load(dir, trainer::CorpusRole::y_natural);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.sample_rate(), 8000.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].id, c[i].id);
    ASSERT_EQ(back[i].samples.size(), c[i].samples.size());
    for (std::size_t t = 0; t < c[i].samples.size(); ++t)
      EXPECT_EQ(back[i].samples[t], static_cast<double>(static_cast<float>(c[i].samples[t])));
  }
  EXPECT_DOUBLE_EQ(back.total_seconds(), 0.75);
}

TEST(Corpus, SynthesisIsDeterministicAndBounded) {
  const auto a = trainer::synthesize_utterance(9);
  const auto b = trainer::synthesize_utterance(9);
  const auto c = trainer::synthesize_utterance(10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  double peak = 0.0;
  for (double v : a) peak = std::max(peak, std::abs(v));
  // Normalised to 0.7 before the -60 dB noise floor is added.
  EXPECT_NEAR(peak, 0.7, 5e-3);
}

TEST(Corpus, RejectsMixedRatesAndDuplicates) {
  const auto dir = scratch("mixed");
  io::write_wav(dir / "a.wav", std::vector<double>(100, 0.1), 8000);
  io::write_wav(dir / "b.wav", std::vector<double>(100, 0.1), 16000);
  EXPECT_THROW(trainer::Corpus::load(dir, trainer::CorpusRole::x_synthetic), std::exception);
  trainer::Corpus c(trainer::CorpusRole::x_synthetic, 8000.0);
  c.add("a", {0.1});
  EXPECT_THROW(c.add("a", {0.2}), std::exception);
}

TEST(Degrade, NyquistCutoffIsTransparent) {
  const double sr = 22050.0;
  const auto x = noise(3, 8192, 0.5);
  const auto y = dsp::lowpass(x, sr / 2, sr);
  ASSERT_EQ(y.size(), x.size());
  EXPECT_LT(oracle::lsd(y, x, 1024, 256, 1e-10), 0.5);
}

TEST(Degrade, FourKilohertzLowpassRejectsUpperBand) {
  const double sr = 22050.0;
  const auto x = noise(4, 16384, 0.5);
  const auto y = dsp::lowpass(x, 4000.0, sr);
  const double in = band_energy(x, 4500.0, sr, 1024);
  const double out = band_energy(y, 4500.0, sr, 1024);
  EXPECT_LE(10.0 * std::log10(out / in), -40.0);
}

TEST(Degrade, LowpassTapsAreSymmetricWithUnitDcGain) {
  const auto h = dsp::lowpass_taps(4000.0, 22050.0);
  ASSERT_EQ(h.size(), 63u);
  double sum = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(h[i], h[h.size() - 1 - i]);
    sum += h[i];
  }
  EXPECT_NEAR(sum, 1.0, 1e-14);
}

TEST(Degrade, DeterministicOutputs) {
  const auto x = noise(5, 5000, 0.5);
  EXPECT_EQ(dsp::lowpass(x, 3000.0, 22050.0), dsp::lowpass(x, 3000.0, 22050.0));
  EXPECT_EQ(dsp::smooth_spectral(x), dsp::smooth_spectral(x));
}

TEST(Degrade, SmoothingWidthOneReconstructs) {
  const auto x = noise(6, 8192, 0.5);
  dsp::SmoothingOptions opts;
  opts.width = 1;
  const auto y = dsp::smooth_spectral(x, opts);
  ASSERT_EQ(y.size(), x.size());
  // Interior samples are covered by full window overlap.
  for (std::size_t i = 1024; i + 1024 < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-9);
}

TEST(Degrade, SmoothingFlattensTemporalModulation) {
  // An amplitude-modulated tone loses modulation depth after smoothing.
  const double sr = 22050.0;
  std::vector<double> x(22050);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / sr;
    x[i] = 0.5 * (1.0 + std::sin(2 * M_PI * 20.0 * t)) * std::sin(2 * M_PI * 1000.0 * t);
  }
  const auto y = dsp::smooth_spectral(x);
  auto envelope_swing = [](const std::vector<double>& v) {
    double lo = 1e9, hi = 0.0;
    for (std::size_t start = 4096; start + 4096 < v.size(); start += 256) {
      double e = 0.0;
      for (std::size_t n = 0; n < 256; ++n) e += v[start + n] * v[start + n];
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    return hi / lo;
  };
  EXPECT_LT(envelope_swing(y), envelope_swing(x));
}
