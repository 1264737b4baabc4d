#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "postfilter/autodiff/graph.hpp"
#include "postfilter/models/parameters.hpp"

namespace postfilter::models {

enum class LayerKind { projection, residual_block, strided_down, strided_up };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);

/// One stage of a generator, written as (channels, kernel, dilation) plus a
/// stride for the resampling stages.
struct LayerSpec {
  LayerKind kind = LayerKind::projection;
  std::size_t channels = 1;
  std::size_t kernel = 1;
  std::size_t dilation = 1;
  std::size_t stride = 1;

  bool operator==(const LayerSpec&) const = default;
};

/// How a forward pass sees parameters: as trainable leaves that collect
/// gradients, or as frozen views.
enum class Binding { trainable, frozen };

struct GeneratorConfig {
  std::string arch = "v2";
  std::vector<LayerSpec> layers;
  double leaky_slope = 0.2;
  /// Add the input waveform to the final projection before tanh.
  bool input_skip = false;
  /// Bypass every nonlinearity (leaky_relu and tanh); used by the probes.
  bool linear = false;
};

/// Projection (64,15,1), residual (128,15,2), n x residual (128,15,4),
/// projection (1,15,1).
struct V2Options {
  std::size_t entry_channels = 64;
  std::size_t channels = 128;
  std::size_t kernel = 15;
  std::size_t first_dilation = 2;
  std::size_t dilation = 4;
  std::size_t blocks = 5;
};

/// Same widths as V2, but two stride-2 stages in front of the residual
/// blocks and two zero-insertion upsampling stages after them.
struct V1Options {
  std::size_t entry_channels = 64;
  std::size_t channels = 128;
  std::size_t kernel = 15;
  std::size_t blocks = 5;
};

GeneratorConfig generator_v2_config(const V2Options& options = {});
GeneratorConfig generator_v1_config(const V1Options& options = {});

struct ReceptiveField {
  std::size_t samples = 0;
  /// False for resampling stacks, where `samples` is the span of input that
  /// can reach one output sample rather than a shift-invariant kernel length.
  bool exact = true;
};

ReceptiveField receptive_field(const std::vector<LayerSpec>& layers);

class GeneratorNet {
 public:
  GeneratorNet(GeneratorConfig config, std::uint64_t seed);

  const GeneratorConfig& config() const noexcept { return config_; }
  ParameterList& params() noexcept { return params_; }
  const ParameterList& params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.element_count(); }
  ReceptiveField receptive_field() const { return models::receptive_field(config_.layers); }
  /// Overall length divisor required of the input (1 for stride-1 stacks).
  std::size_t length_multiple() const noexcept { return length_multiple_; }

  /// [1 x T] or [B x 1 x T] -> same shape.
  ad::Var forward(ad::Graph& graph, ad::Var wave, Binding binding = Binding::trainable);
  /// Forward without gradient bookkeeping on a single utterance.
  std::vector<double> infer(std::span<const double> wave) const;
  /// Streaming inference in chunks of `chunk` output samples, each evaluated
  /// with receptive_field - 1 samples of context on both sides.
  std::vector<double> infer_chunked(std::span<const double> wave, std::size_t chunk) const;

 private:
  struct Conv {
    std::size_t weight;
    std::size_t bias;
  };
  struct Stage {
    LayerSpec spec;
    std::size_t in_channels;
    Conv main;
    Conv pointwise;  // residual_block only
    Conv skip;       // residual_block with a channel change only
    bool has_skip = false;
  };

  ad::Var run(ad::Graph& graph, ad::Var wave, Binding binding) const;

  GeneratorConfig config_;
  ParameterList params_;
  std::vector<Stage> stages_;
  std::size_t length_multiple_ = 1;
};

void to_json(nlohmann::json& j, const LayerSpec& spec);
void from_json(const nlohmann::json& j, LayerSpec& spec);
void to_json(nlohmann::json& j, const GeneratorConfig& config);
void from_json(const nlohmann::json& j, GeneratorConfig& config);

}  // namespace postfilter::models
