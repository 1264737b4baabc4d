#include "postfilter/trainer/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "postfilter/autodiff/tensor.hpp"
#include "postfilter/io/files.hpp"

namespace postfilter::trainer {

Corpus::Corpus(CorpusRole role, double sample_rate) : role_(role), sample_rate_(sample_rate) {
  if (!(sample_rate > 0.0)) throw ContractViolation("corpus: sample rate must be positive");
}

Corpus Corpus::load(const std::filesystem::path& dir, CorpusRole role) {
  const auto files = io::list_wavs(dir);
  if (files.empty()) throw io::IoError("no .wav files in " + dir.string());
  std::vector<io::Wav> wavs;
  for (const auto& f : files) wavs.push_back(io::read_wav(f));
  Corpus corpus(role, wavs.front().sample_rate);
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (wavs[i].sample_rate != wavs.front().sample_rate) {
      throw io::IoError(files[i].string() + ": sample rate " + std::to_string(wavs[i].sample_rate) +
                        " differs from " + std::to_string(wavs.front().sample_rate));
    }
    corpus.add(files[i].stem().string(), std::move(wavs[i].samples));
  }
  return corpus;
}

void Corpus::add(std::string id, std::vector<double> samples) {
  if (find(id) != size()) throw ContractViolation("corpus: duplicate utterance id '" + id + "'");
  for (double& s : samples) {
    if (!std::isfinite(s)) throw ContractViolation("corpus: non-finite sample in '" + id + "'");
    s = std::clamp(s, -1.0, 1.0);
  }
  entries_.push_back({std::move(id), std::move(samples)});
}

void Corpus::save(const std::filesystem::path& dir) const {
  for (const auto& u : entries_) {
    io::write_wav(dir / (u.id + ".wav"), u.samples, static_cast<std::uint32_t>(sample_rate_));
  }
}

std::size_t Corpus::find(const std::string& id) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Utterance& u) { return u.id == id; });
  return static_cast<std::size_t>(it - entries_.begin());
}

double Corpus::total_seconds() const {
  double n = 0.0;
  for (const auto& u : entries_) n += static_cast<double>(u.samples.size());
  return n / sample_rate_;
}

namespace {

// Two-pole resonator at centre frequency fc with bandwidth bw, unity gain at fc.
class Resonator {
 public:
  void set(double fc, double bw, double sr) {
    const double r = std::exp(-std::numbers::pi * bw / sr);
    const double theta = 2.0 * std::numbers::pi * fc / sr;
    a1_ = 2.0 * r * std::cos(theta);
    a2_ = -r * r;
    gain_ = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
  }
  double step(double x) {
    const double y = gain_ * x + a1_ * y1_ + a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_ = 0.0, a2_ = 0.0, gain_ = 1.0, y1_ = 0.0, y2_ = 0.0;
};

struct Segment {
  enum Kind { vowel, fricative, pause } kind;
  std::size_t length;
  double formants[4];
  double fricative_centre;
};

}  // namespace

std::vector<double> synthesize_utterance(std::uint64_t seed, const SynthOptions& o) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sr = o.sample_rate;
  const auto total = static_cast<std::size_t>(o.seconds * sr);

  std::vector<Segment> plan;
  std::size_t planned = 0;
  while (planned < total) {
    Segment s{};
    const double pick = uni(rng);
    s.kind = pick < 0.68 ? Segment::vowel : (pick < 0.9 ? Segment::fricative : Segment::pause);
    const double dur = s.kind == Segment::pause ? 0.05 + 0.1 * uni(rng) : 0.09 + 0.2 * uni(rng);
    s.length = static_cast<std::size_t>(dur * sr);
    s.formants[0] = 300.0 + 600.0 * uni(rng);
    s.formants[1] = 900.0 + 1500.0 * uni(rng);
    s.formants[2] = 2300.0 + 900.0 * uni(rng);
    s.formants[3] = 3400.0 + 1200.0 * uni(rng);
    s.fricative_centre = 3500.0 + 4500.0 * uni(rng);
    plan.push_back(s);
    planned += s.length;
  }

  const double f0_base = 90.0 + 130.0 * uni(rng);
  const double drift_rate = 0.3 + 0.7 * uni(rng);
  std::vector<double> out(total, 0.0);
  Resonator formant[4];
  Resonator hiss;
  double phase = 0.0;
  double tilt = 0.0;
  std::size_t t = 0;
  for (const Segment& s : plan) {
    const double bandwidths[4] = {70.0, 110.0, 160.0, 220.0};
    for (int k = 0; k < 4; ++k) formant[k].set(s.formants[k], bandwidths[k], sr);
    hiss.set(s.fricative_centre, 1500.0 + 1500.0 * uni(rng), sr);
    const double level = s.kind == Segment::pause ? 0.0 : 0.4 + 0.6 * uni(rng);
    for (std::size_t n = 0; n < s.length && t < total; ++n, ++t) {
      // Raised-cosine attack and release over 15 ms.
      const double ramp = std::min(1.0, std::min(n, s.length - n) / (0.015 * sr));
      const double env = level * (0.5 - 0.5 * std::cos(std::numbers::pi * ramp));
      const double time = static_cast<double>(t) / sr;
      const double f0 = f0_base * (1.0 + 0.12 * std::sin(2.0 * std::numbers::pi * drift_rate * time)) *
                        (1.0 + 0.01 * gauss(rng));
      phase += f0 / sr;
      double pulse = 0.0;
      if (phase >= 1.0) {
        phase -= std::floor(phase);
        pulse = 1.0;
      }
      tilt = 0.65 * tilt + pulse;
      double voiced = 0.0;
      if (s.kind == Segment::vowel) {
        const double source = tilt + 0.02 * gauss(rng);
        for (int k = 0; k < 4; ++k) voiced += 30.0 * formant[k].step(source) / (1.0 + k);
      } else {
        for (int k = 0; k < 4; ++k) formant[k].step(0.0);
      }
      const double noise = hiss.step(gauss(rng));
      const double frication = s.kind == Segment::fricative ? 0.8 * noise : 0.03 * noise;
      out[t] = env * (voiced + frication);
    }
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.0 ? o.peak / peak : 0.0;
  const double floor = std::pow(10.0, o.noise_floor_db / 20.0);
  for (double& v : out) v = v * gain + floor * gauss(rng);
  return out;
}

Corpus synthesize_corpus(std::size_t count, std::uint64_t seed, const SynthOptions& options) {
  Corpus corpus(CorpusRole::y_natural, options.sample_rate);
  for (std::size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "utt%03zu", i);
    corpus.add(id, synthesize_utterance(seed * 1000003ULL + i, options));
  }
  return corpus;
}

}  // namespace postfilter::trainer
