#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "postfilter/dsp/frontend.hpp"
#include "postfilter/io/files.hpp"

namespace postfilter::metrics {

struct LsdOptions {
  std::size_t frame_len = 1024;
  std::size_t hop = 256;
  double eps = 1e-10;
};

/// Frame-averaged RMS over linear-frequency bins of
/// 20 log10((|A| + eps) / (|B| + eps)), Hann-windowed frames. Lengths may
/// differ by less than one hop (the longer signal is truncated).
double lsd(std::span<const double> ref, std::span<const double> deg, const LsdOptions& options = {});

inline constexpr std::size_t kModulationFft = 8192;
inline constexpr double kModulationEps = 1e-10;

/// 10 log10(|FFT(track - mean)|^2 + eps) over bins 0..n_fft/2; the track is
/// zero-padded or truncated to n_fft.
std::vector<double> modulation_spectrum(std::span<const double> track, std::size_t n_fft = kModulationFft,
                                        double eps = kModulationEps);

struct MsdOptions {
  std::size_t n_fft = kModulationFft;
  double eps = kModulationEps;
  /// c0 follows frame energy; the curve averages coefficients from here on.
  std::size_t first_coefficient = 1;
};

struct ModulationCurve {
  std::vector<double> frequency_hz;
  std::vector<double> value_db;
};

/// Modulation spectrum averaged over utterances and coefficients.
ModulationCurve mean_modulation_spectrum(std::span<const dsp::FeatureTrack> tracks, const MsdOptions& options = {});

/// MS_target(f) - MS_reference(f), both sides averaged as above.
ModulationCurve msd(std::span<const dsp::FeatureTrack> target, std::span<const dsp::FeatureTrack> reference,
                    const MsdOptions& options = {});

/// Mean of the curve over its top `fraction` of modulation frequencies.
double high_band_mean(const ModulationCurve& curve, double fraction = 0.25);

io::CsvTable curve_table(const ModulationCurve& curve);

/// Per-utterance values with their mean and a Student-t 95% interval.
struct MetricReport {
  std::string metric;
  std::vector<std::string> ids;
  std::vector<double> values;

  void add(std::string id, double value);
  double mean() const;
  /// Half-width of the 95% confidence interval; 0 for fewer than two values.
  double ci95() const;
  /// utterance_id, value, ci95 columns with a final AGGREGATE row.
  io::CsvTable table() const;
};

using WaveFn = std::function<std::vector<double>(std::span<const double>)>;

struct Peak {
  double frequency_hz = 0.0;
  double relative_db = 0.0;
};

struct AliasProbeOptions {
  double duration_s = 1.0;
  /// Samples dropped from each end of the output before analysis.
  std::size_t margin = 0;
  double floor_db = -100.0;
  std::size_t zero_pad = 8;
  /// Local maxima within this many analysis bins of a stronger peak are
  /// Hann-window side lobes and are not listed.
  std::size_t guard_bins = 64;
};

struct AliasProbeResult {
  double tone_hz = 0.0;
  double sample_rate = 0.0;
  /// Sorted by magnitude, strongest first.
  std::vector<Peak> peaks;
  /// Strongest component outside the guard band of the input tone, relative
  /// to the input-frequency peak.
  double image_to_signal_db = 0.0;

  io::CsvTable table() const;
};

/// Drives `fn` with a unit-amplitude sine and inspects the interior output.
AliasProbeResult alias_probe(const WaveFn& fn, double tone_hz, double sample_rate,
                             const AliasProbeOptions& options = {});

/// Decimation by 2 (dropping odd samples) followed by zero insertion.
std::vector<double> naive_down_up(std::span<const double> wave);

/// deviation[s] = max over interior t of |fn(shift_s x)[t] - fn(x)[t - s]|,
/// s = 0..max_shift, where shift_s delays by s samples with zero fill.
std::vector<double> shift_equivariance_probe(const WaveFn& fn, std::span<const double> wave, std::size_t max_shift,
                                             std::size_t margin);

struct BenchResult {
  double sample_rate = 0.0;
  double seconds_of_audio = 0.0;
  std::size_t threads = 1;
  std::size_t runs = 0;
  double median_wall_s = 0.0;
  double samples_per_second = 0.0;
  double real_time_factor = 0.0;
  std::string build_mode;

  io::CsvTable table() const;
};

/// Median wall time over `runs` (at least 3) calls on seeded noise.
BenchResult throughput_bench(const WaveFn& fn, double sample_rate, double seconds, std::size_t threads = 1,
                             std::size_t runs = 3, std::uint64_t seed = 1);

/// Name of the optimisation level this library was compiled with.
std::string build_mode();

}  // namespace postfilter::metrics
