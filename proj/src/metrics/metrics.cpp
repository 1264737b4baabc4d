#include "postfilter/metrics/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "postfilter/autodiff/tensor.hpp"
#include "postfilter/dsp/fft.hpp"

#ifndef POSTFILTER_BUILD_MODE
#define POSTFILTER_BUILD_MODE "unknown"
#endif

namespace postfilter::metrics {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

double lsd(std::span<const double> ref, std::span<const double> deg, const LsdOptions& o) {
  require(o.hop > 0 && o.frame_len > 0, "lsd: frame_len and hop must be positive");
  const std::size_t longer = std::max(ref.size(), deg.size());
  const std::size_t length = std::min(ref.size(), deg.size());
  require(longer - length < o.hop, "lsd: lengths " + std::to_string(ref.size()) + " and " +
                                       std::to_string(deg.size()) + " differ by at least one hop (" +
                                       std::to_string(o.hop) + ")");
  require(length >= o.frame_len, "lsd: signals are shorter than one frame");
  const auto window = dsp::hann_window(o.frame_len);
  const std::size_t frames = (length - o.frame_len) / o.hop + 1;
  std::vector<double> fa(o.frame_len), fb(o.frame_len);
  double total = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t n = 0; n < o.frame_len; ++n) {
      fa[n] = ref[f * o.hop + n] * window[n];
      fb[n] = deg[f * o.hop + n] * window[n];
    }
    const auto sa = dsp::rfft(fa, o.frame_len);
    const auto sb = dsp::rfft(fb, o.frame_len);
    double acc = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) {
      const double d = 20.0 * std::log10((std::abs(sa[k]) + o.eps) / (std::abs(sb[k]) + o.eps));
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(sa.size()));
  }
  return total / static_cast<double>(frames);
}

std::vector<double> modulation_spectrum(std::span<const double> track, std::size_t n_fft, double eps) {
  require(track.size() >= 2, "modulation_spectrum: track needs at least two frames");
  require(n_fft >= 2 && n_fft % 2 == 0, "modulation_spectrum: n_fft must be even");
  double mean = 0.0;
  for (double v : track) mean += v;
  mean /= static_cast<double>(track.size());
  std::vector<double> centered(std::min(track.size(), n_fft));
  for (std::size_t i = 0; i < centered.size(); ++i) centered[i] = track[i] - mean;
  const auto spec = dsp::rfft(centered, n_fft);
  std::vector<double> out(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) out[k] = 10.0 * std::log10(std::norm(spec[k]) + eps);
  return out;
}

ModulationCurve mean_modulation_spectrum(std::span<const dsp::FeatureTrack> tracks, const MsdOptions& o) {
  require(!tracks.empty(), "modulation spectrum: empty corpus");
  const double rate = tracks.front().frame_rate;
  const std::size_t coeffs = tracks.front().coefficients();
  require(o.first_coefficient < coeffs, "modulation spectrum: first_coefficient beyond the track");
  ModulationCurve curve;
  const std::size_t bins = o.n_fft / 2 + 1;
  curve.value_db.assign(bins, 0.0);
  curve.frequency_hz.resize(bins);
  for (std::size_t k = 0; k < bins; ++k)
    curve.frequency_hz[k] = static_cast<double>(k) * rate / static_cast<double>(o.n_fft);
  std::size_t count = 0;
  for (const auto& t : tracks) {
    require(t.frame_rate == rate && t.coefficients() == coeffs,
            "modulation spectrum: tracks differ in frame rate or coefficient count");
    for (std::size_t c = o.first_coefficient; c < coeffs; ++c) {
      const auto ms = modulation_spectrum(t.row(c), o.n_fft, o.eps);
      for (std::size_t k = 0; k < bins; ++k) curve.value_db[k] += ms[k];
      ++count;
    }
  }
  for (double& v : curve.value_db) v /= static_cast<double>(count);
  return curve;
}

ModulationCurve msd(std::span<const dsp::FeatureTrack> target, std::span<const dsp::FeatureTrack> reference,
                    const MsdOptions& o) {
  require(!target.empty() && !reference.empty(), "msd: empty corpus");
  require(target.front().frame_rate == reference.front().frame_rate &&
              target.front().coefficients() == reference.front().coefficients(),
          "msd: both sides must use the same frontend");
  ModulationCurve a = mean_modulation_spectrum(target, o);
  const ModulationCurve b = mean_modulation_spectrum(reference, o);
  for (std::size_t k = 0; k < a.value_db.size(); ++k) a.value_db[k] -= b.value_db[k];
  return a;
}

double high_band_mean(const ModulationCurve& curve, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "high_band_mean: fraction must lie in (0, 1]");
  const std::size_t n = curve.value_db.size();
  require(n > 0, "high_band_mean: empty curve");
  const auto first = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - fraction)));
  double acc = 0.0;
  for (std::size_t k = first; k < n; ++k) acc += curve.value_db[k];
  return acc / static_cast<double>(n - first);
}

io::CsvTable curve_table(const ModulationCurve& curve) {
  io::CsvTable t({"modulation_hz", "msd_db"});
  for (std::size_t k = 0; k < curve.value_db.size(); ++k)
    t.add_row({io::format_double(curve.frequency_hz[k]), io::format_double(curve.value_db[k])});
  return t;
}

void MetricReport::add(std::string id, double value) {
  ids.push_back(std::move(id));
  values.push_back(value);
}

double MetricReport::mean() const {
  require(!values.empty(), "MetricReport: no values");
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

double MetricReport::ci95() const {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double m = mean();
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  return boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(n));
}

io::CsvTable MetricReport::table() const {
  io::CsvTable t({"utterance_id", "value", "ci95"});
  for (std::size_t i = 0; i < values.size(); ++i) t.add_row({ids[i], io::format_double(values[i]), ""});
  t.add_row({"AGGREGATE", io::format_double(mean()), io::format_double(ci95())});
  return t;
}

io::CsvTable AliasProbeResult::table() const {
  io::CsvTable t({"tone_hz", "sample_rate", "peak_hz", "mirror_hz", "relative_db", "image_to_signal_db"});
  for (const auto& p : peaks) {
    t.add_row({io::format_double(tone_hz), io::format_double(sample_rate), io::format_double(p.frequency_hz),
               io::format_double(sample_rate - p.frequency_hz), io::format_double(p.relative_db),
               io::format_double(image_to_signal_db)});
  }
  return t;
}

AliasProbeResult alias_probe(const WaveFn& fn, double tone_hz, double sample_rate, const AliasProbeOptions& o) {
  require(tone_hz > 0.0 && tone_hz < sample_rate / 2.0, "alias_probe: tone must lie in (0, sample_rate/2)");
  const auto n = static_cast<std::size_t>(std::llround(o.duration_s * sample_rate));
  std::vector<double> tone(n);
  for (std::size_t i = 0; i < n; ++i)
    tone[i] = std::sin(2.0 * std::numbers::pi * tone_hz * static_cast<double>(i) / sample_rate);
  const auto out = fn(tone);
  require(out.size() > 2 * o.margin + 16, "alias_probe: output too short for the requested margin");
  const std::size_t len = out.size() - 2 * o.margin;
  const auto window = dsp::hann_window(len);
  std::vector<double> frame(len);
  for (std::size_t i = 0; i < len; ++i) frame[i] = out[o.margin + i] * window[i];
  const std::size_t n_fft = o.zero_pad * next_pow2(len);
  const auto spec = dsp::rfft(frame, n_fft);
  std::vector<double> mag(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) mag[k] = std::abs(spec[k]);

  const double bin_hz = sample_rate / static_cast<double>(n_fft);
  const double guard_hz = static_cast<double>(o.guard_bins) * sample_rate / static_cast<double>(len);
  auto near = [&](double a, double b) { return std::abs(a - b) <= guard_hz; };

  double signal = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k)
    if (near(static_cast<double>(k) * bin_hz, tone_hz)) signal = std::max(signal, mag[k]);
  require(signal > 0.0, "alias_probe: no output energy at the input frequency");

  AliasProbeResult r;
  r.tone_hz = tone_hz;
  r.sample_rate = sample_rate;
  std::vector<Peak> candidates;
  for (std::size_t k = 1; k + 1 < mag.size(); ++k) {
    if (!(mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])) continue;
    const double db = 20.0 * std::log10(mag[k] / signal);
    if (db < o.floor_db) continue;
    // Parabolic refinement on the log magnitude.
    const double a = std::log(mag[k - 1]), b = std::log(mag[k]), c = std::log(mag[k + 1]);
    const double denom = a - 2.0 * b + c;
    const double delta = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    candidates.push_back({(static_cast<double>(k) + delta) * bin_hz, db});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Peak& x, const Peak& y) { return x.relative_db > y.relative_db; });
  for (const auto& p : candidates) {
    const bool shadowed = std::any_of(r.peaks.begin(), r.peaks.end(),
                                      [&](const Peak& q) { return near(p.frequency_hz, q.frequency_hz); });
    if (!shadowed) r.peaks.push_back(p);
  }
  double strongest = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k)
    if (!near(static_cast<double>(k) * bin_hz, tone_hz)) strongest = std::max(strongest, mag[k]);
  r.image_to_signal_db = 20.0 * std::log10(std::max(strongest / signal, 1e-300));
  return r;
}

std::vector<double> naive_down_up(std::span<const double> wave) {
  std::vector<double> out(wave.size(), 0.0);
  for (std::size_t i = 0; i < wave.size(); i += 2) out[i] = wave[i];
  return out;
}

std::vector<double> shift_equivariance_probe(const WaveFn& fn, std::span<const double> wave, std::size_t max_shift,
                                             std::size_t margin) {
  const std::size_t n = wave.size();
  require(n > 2 * margin + max_shift, "shift_equivariance_probe: wave shorter than margins plus shifts");
  const auto base = fn(wave);
  require(base.size() == n, "shift_equivariance_probe: network must preserve length");
  std::vector<double> deviation(max_shift + 1, 0.0);
  for (std::size_t s = 1; s <= max_shift; ++s) {
    std::vector<double> shifted(n, 0.0);
    std::copy(wave.begin(), wave.end() - static_cast<std::ptrdiff_t>(s), shifted.begin() + static_cast<std::ptrdiff_t>(s));
    const auto out = fn(shifted);
    require(out.size() == n, "shift_equivariance_probe: network must preserve length");
    double worst = 0.0;
    for (std::size_t t = margin + s; t + margin < n; ++t) worst = std::max(worst, std::abs(out[t] - base[t - s]));
    deviation[s] = worst;
  }
  return deviation;
}

io::CsvTable BenchResult::table() const {
  io::CsvTable t({"sample_rate", "seconds_of_audio", "threads", "runs", "median_wall_s", "samples_per_second",
                  "real_time_factor", "build_mode"});
  t.add_row({io::format_double(sample_rate), io::format_double(seconds_of_audio), std::to_string(threads),
             std::to_string(runs), io::format_double(median_wall_s), io::format_double(samples_per_second),
             io::format_double(real_time_factor), build_mode});
  return t;
}

BenchResult throughput_bench(const WaveFn& fn, double sample_rate, double seconds, std::size_t threads,
                             std::size_t runs, std::uint64_t seed) {
  require(sample_rate > 0.0 && seconds > 0.0, "throughput_bench: sample_rate and seconds must be positive");
  runs = std::max<std::size_t>(runs, 3);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> wave(n);
  for (double& v : wave) v = u(rng);
  std::vector<double> times;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = fn(wave);
    const auto t1 = std::chrono::steady_clock::now();
    require(!out.empty(), "throughput_bench: network produced no output");
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  BenchResult b;
  b.sample_rate = sample_rate;
  b.seconds_of_audio = static_cast<double>(n) / sample_rate;
  b.threads = threads;
  b.runs = runs;
  const std::size_t mid = times.size() / 2;
  b.median_wall_s = times.size() % 2 == 1 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
  b.samples_per_second = static_cast<double>(n) / b.median_wall_s;
  b.real_time_factor = b.samples_per_second / sample_rate;
  b.build_mode = build_mode();
  return b;
}

std::string build_mode() { return POSTFILTER_BUILD_MODE; }

}  // namespace postfilter::metrics
