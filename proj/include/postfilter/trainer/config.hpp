#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "postfilter/dsp/frontend.hpp"
#include "postfilter/models/discriminator.hpp"
#include "postfilter/models/generator.hpp"
#include "postfilter/objectives/losses.hpp"

namespace postfilter::trainer {

enum class PairingMode { paired, unpaired };

std::string to_string(PairingMode mode);
PairingMode parse_pairing(const std::string& name);

struct TrainConfig {
  std::size_t total_iters = 2000;
  std::size_t warm_iters = 1000;
  double lr0 = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 4;
  std::size_t segment_len = 16384;
  PairingMode pairing = PairingMode::paired;
  std::uint64_t seed = 1;
  /// Spectral domains judged alongside the waveform, on both sides.
  std::vector<models::Domain> domains{models::Domain::msp};
  objectives::LossWeights weights;
  models::GeneratorConfig generator = models::generator_v2_config();
  models::DiscriminatorConfig wave_discriminator = models::wave_discriminator_config();
  /// Applied to every enabled spectral domain (the domain field is overridden).
  models::DiscriminatorConfig spectral_discriminator = models::spectral_discriminator_config(models::Domain::msp);
  dsp::FrontendConfig frontend;
  std::size_t log_interval = 10;
  std::size_t checkpoint_interval = 0;

  /// Throws ContractViolation naming the first inconsistent field.
  void validate() const;
};

/// Generator and discriminator widths that fit a single-core desk budget.
TrainConfig desk_config();

/// Strict conversion: unknown keys raise ContractViolation with their path.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
nlohmann::json frontend_to_json(const dsp::FrontendConfig& c);
dsp::FrontendConfig frontend_from_json(const nlohmann::json& j);
nlohmann::json weights_to_json(const objectives::LossWeights& w);
objectives::LossWeights weights_from_json(const nlohmann::json& j);

/// Rejects keys of `j` outside `allowed`, reporting them under `where`.
void require_known_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where);

}  // namespace postfilter::trainer
