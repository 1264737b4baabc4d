#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "postfilter/dsp/frontend.hpp"
#include "postfilter/models/generator.hpp"

namespace postfilter::models {

enum class Domain { wave, msp, mfcc, phase };

std::string to_string(Domain domain);
Domain parse_domain(const std::string& name);

enum class AdversarialVariant { log, least_squares };

std::string to_string(AdversarialVariant variant);
AdversarialVariant parse_variant(const std::string& name);

struct DiscriminatorConfig {
  Domain domain = Domain::wave;
  std::size_t channels = 64;
  std::size_t kernel = 15;
  /// One conv layer (with leaky_relu) per entry.
  std::vector<std::size_t> dilations{1, 2, 4, 8};
  /// Per-layer strides; empty means all 1.
  std::vector<std::size_t> strides;
  std::size_t head_kernel = 3;
  double leaky_slope = 0.2;
  AdversarialVariant variant = AdversarialVariant::log;
};

/// Wave domain: conv layers over the waveform. Spectral domains: the same
/// structure over the frame axis of the attached frontend's features.
DiscriminatorConfig wave_discriminator_config();
DiscriminatorConfig spectral_discriminator_config(Domain domain);

/// Scores a batch of waveforms. The head's patch scores are averaged over
/// time after a sigmoid (log variant) or as-is (least-squares variant).
class DiscriminatorNet {
 public:
  DiscriminatorNet(DiscriminatorConfig config, std::optional<dsp::FrontendConfig> frontend,
                   std::uint64_t seed);

  const DiscriminatorConfig& config() const noexcept { return config_; }
  Domain domain() const noexcept { return config_.domain; }
  const dsp::SpectralFrontend* frontend() const noexcept { return frontend_.get(); }
  ParameterList& params() noexcept { return params_; }
  const ParameterList& params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.element_count(); }

  /// [B x 1 x T] (or [1 x T]) -> [B] scores.
  ad::Var forward(ad::Graph& graph, ad::Var wave, Binding binding = Binding::trainable);
  /// Scores for precomputed inputs: waveforms for the wave domain, frontend
  /// features [B x C x F] otherwise.
  ad::Var score(ad::Graph& graph, ad::Var input, Binding binding = Binding::trainable);

 private:
  struct Conv {
    std::size_t weight;
    std::size_t bias;
    std::size_t dilation;
    std::size_t stride;
  };

  DiscriminatorConfig config_;
  std::shared_ptr<const dsp::SpectralFrontend> frontend_;
  ParameterList params_;
  std::vector<Conv> layers_;
  Conv head_{};
};

void to_json(nlohmann::json& j, const DiscriminatorConfig& config);
void from_json(const nlohmann::json& j, DiscriminatorConfig& config);

}  // namespace postfilter::models
