#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "postfilter/metrics/metrics.hpp"
#include "postfilter/models/generator.hpp"

namespace postfilter::cli {

namespace fs = std::filesystem;

/// Command failed for a reason the user can fix; reported without a trace.
class CliError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthOptions {
  fs::path out;
  std::size_t count = 10;
  double seconds = 3.0;
  double sample_rate = 22050.0;
  std::uint64_t seed = 1;
};
int cmd_synth(const SynthOptions& o, std::ostream& out);

struct DegradeOptions {
  fs::path in;
  fs::path out;
  std::string kind = "lowpass";
  double cutoff_hz = 4000.0;
  std::size_t taps = 63;
  std::size_t frame_len = 1024;
  std::size_t hop = 256;
  std::size_t width = 5;
  bool pcm16 = false;
};
/// Exit code 1 when any file failed; the others are still written.
int cmd_degrade(const DegradeOptions& o, std::ostream& out, std::ostream& err);

struct TrainOptions {
  std::string preset = "desk";
  fs::path config;
  std::vector<std::string> overrides;
  fs::path resume;
};
int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err);

struct ConvertOptions {
  fs::path checkpoint;
  fs::path in;
  fs::path out;
  std::string direction = "xy";
  std::size_t chunk = 0;
  bool pcm16 = false;
  bool normalize = false;
};
int cmd_convert(const ConvertOptions& o, std::ostream& out, std::ostream& err);

struct EvaluateOptions {
  fs::path ref;
  fs::path deg;
  fs::path out;
  std::vector<std::string> metrics{"lsd", "msd"};
};
int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err);

/// A named built-in network or a checkpoint's generator.
struct TargetOptions {
  std::string target;
  fs::path checkpoint;
  std::string direction = "xy";
  bool linear = false;
  std::uint64_t seed = 1;
};

struct ProbeOptions {
  std::string kind = "alias";
  TargetOptions target;
  double tone_hz = 6000.0;
  double sample_rate = 22050.0;
  double duration_s = 1.0;
  std::size_t max_shift = 4;
  std::size_t length = 4096;
  fs::path out;
};
int cmd_probe(const ProbeOptions& o, std::ostream& out);

struct BenchOptions {
  TargetOptions target;
  double seconds = 10.0;
  std::size_t threads = 1;
  std::size_t runs = 3;
  std::size_t chunk = 4096;
  double sample_rate = 22050.0;
  fs::path out;
};
int cmd_bench(const BenchOptions& o, std::ostream& out);

struct GradcheckOptions {
  std::size_t seeds = 100;
  std::uint64_t first_seed = 0;
  std::string filter;
  fs::path out;
};
int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out);

/// Built-in probe and bench targets.
const std::vector<std::string>& builtin_targets();

/// Waveform map for a target together with the sample rate it expects
/// (0 when any rate is accepted).
struct ResolvedTarget {
  std::string label;
  metrics::WaveFn fn;
  double sample_rate = 0.0;
  std::shared_ptr<const models::GeneratorNet> generator;
  std::size_t margin = 0;
};
ResolvedTarget resolve_target(const TargetOptions& o);

/// Pads to the generator's length multiple, runs it and trims back.
std::vector<double> run_generator(const models::GeneratorNet& g, std::span<const double> wave, std::size_t chunk = 0);

/// Splits the output into `threads` contiguous parts, each evaluated with
/// receptive-field context on its own thread and streamed in `chunk`-sample
/// pieces when `chunk` is non-zero.
std::vector<double> run_generator_parallel(const models::GeneratorNet& g, std::span<const double> wave,
                                           std::size_t threads, std::size_t chunk = 0);

}  // namespace postfilter::cli
