#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace postfilter::trainer {

enum class CorpusRole { x_synthetic, y_natural };

struct Utterance {
  std::string id;
  std::vector<double> samples;
};

/// Mono waveforms of one domain at a single sample rate, samples in [-1, 1].
class Corpus {
 public:
  Corpus(CorpusRole role, double sample_rate);

  /// Every `*.wav` in `dir`; the file stem becomes the utterance id.
  static Corpus load(const std::filesystem::path& dir, CorpusRole role);

  void add(std::string id, std::vector<double> samples);
  void save(const std::filesystem::path& dir) const;

  CorpusRole role() const noexcept { return role_; }
  double sample_rate() const noexcept { return sample_rate_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Utterance& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<Utterance>& entries() const noexcept { return entries_; }
  /// Index of `id`, or size() when absent.
  std::size_t find(const std::string& id) const;
  double total_seconds() const;

 private:
  CorpusRole role_;
  double sample_rate_;
  std::vector<Utterance> entries_;
};

struct SynthOptions {
  double sample_rate = 22050.0;
  double seconds = 3.0;
  double peak = 0.7;
  /// Level of the stationary noise floor relative to full scale, in dB.
  double noise_floor_db = -60.0;
};

/// Speech-like test signal: syllables of formant-filtered glottal pulse trains
/// with a drifting pitch, fricative noise bursts and short pauses.
std::vector<double> synthesize_utterance(std::uint64_t seed, const SynthOptions& options = {});

/// `count` utterances with ids utt000, utt001, ...
Corpus synthesize_corpus(std::size_t count, std::uint64_t seed, const SynthOptions& options = {});

}  // namespace postfilter::trainer
