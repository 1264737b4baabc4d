#include "postfilter/trainer/config.hpp"

#include <algorithm>

namespace postfilter::trainer {

using nlohmann::json;

std::string to_string(PairingMode mode) { return mode == PairingMode::paired ? "paired" : "unpaired"; }

PairingMode parse_pairing(const std::string& name) {
  if (name == "paired") return PairingMode::paired;
  if (name == "unpaired") return PairingMode::unpaired;
  throw ContractViolation("unknown pairing mode '" + name + "' (expected paired or unpaired)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ContractViolation("train config: " + what); };
  if (total_iters == 0) fail("total_iters must be positive");
  if (warm_iters > total_iters) fail("warm_iters exceeds total_iters");
  if (!(lr0 > 0.0)) fail("lr0 must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("adam betas must lie in [0, 1)");
  if (batch_size == 0) fail("batch_size must be positive");
  const auto rf = models::receptive_field(generator.layers);
  if (segment_len < rf.samples) {
    fail("segment_len " + std::to_string(segment_len) + " is shorter than the generator receptive field " +
         std::to_string(rf.samples));
  }
  if (segment_len < frontend.frame_len && !domains.empty()) fail("segment_len is shorter than frontend.frame_len");
  if (weights.lambda_cyc < 0.0 || weights.lambda_id < 0.0) fail("loss weights must be non-negative");
  for (auto d : domains) {
    if (d == models::Domain::wave) fail("domains lists spectral domains only; the wave domain is always on");
  }
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (std::count(domains.begin(), domains.end(), domains[i]) > 1) fail("duplicate entry in domains");
  }
}

TrainConfig desk_config() {
  TrainConfig c;
  models::V2Options g;
  g.entry_channels = 4;
  g.channels = 8;
  c.generator = models::generator_v2_config(g);
  c.generator.input_skip = true;
  c.wave_discriminator.channels = 16;
  c.wave_discriminator.strides = {4, 4, 4, 1};
  c.spectral_discriminator.channels = 32;
  c.frontend.log_mel = true;
  return c;
}

void require_known_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ContractViolation(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw ContractViolation("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json frontend_to_json(const dsp::FrontendConfig& c) {
  return {{"sample_rate", c.sample_rate}, {"frame_len", c.frame_len},   {"hop", c.hop},
          {"fft_size", c.fft_size},       {"n_mels", c.n_mels},         {"n_ceps", c.n_ceps},
          {"fmin", c.fmin},               {"fmax", c.fmax},             {"log_mel", c.log_mel},
          {"magnitude_eps", c.magnitude_eps}, {"log_floor", c.log_floor}};
}

dsp::FrontendConfig frontend_from_json(const json& j) {
  require_known_keys(j,
                     {"sample_rate", "frame_len", "hop", "fft_size", "n_mels", "n_ceps", "fmin", "fmax", "log_mel",
                      "magnitude_eps", "log_floor"},
                     "frontend");
  dsp::FrontendConfig c;
  read(j, "sample_rate", c.sample_rate);
  read(j, "frame_len", c.frame_len);
  read(j, "hop", c.hop);
  read(j, "fft_size", c.fft_size);
  read(j, "n_mels", c.n_mels);
  read(j, "n_ceps", c.n_ceps);
  read(j, "fmin", c.fmin);
  read(j, "fmax", c.fmax);
  read(j, "log_mel", c.log_mel);
  read(j, "magnitude_eps", c.magnitude_eps);
  read(j, "log_floor", c.log_floor);
  return c;
}

json weights_to_json(const objectives::LossWeights& w) {
  return {{"lambda_cyc", w.lambda_cyc},
          {"lambda_id", w.lambda_id},
          {"id_cutoff_iter", w.id_cutoff_iter},
          {"variant", models::to_string(w.variant)},
          {"log_eps", w.log_eps}};
}

objectives::LossWeights weights_from_json(const json& j) {
  require_known_keys(j, {"lambda_cyc", "lambda_id", "id_cutoff_iter", "variant", "log_eps"}, "weights");
  objectives::LossWeights w;
  read(j, "lambda_cyc", w.lambda_cyc);
  read(j, "lambda_id", w.lambda_id);
  read(j, "id_cutoff_iter", w.id_cutoff_iter);
  if (j.contains("variant")) w.variant = models::parse_variant(j.at("variant").get<std::string>());
  read(j, "log_eps", w.log_eps);
  return w;
}

void to_json(json& j, const TrainConfig& c) {
  std::vector<std::string> domains;
  for (auto d : c.domains) domains.push_back(models::to_string(d));
  j = {{"total_iters", c.total_iters},
       {"warm_iters", c.warm_iters},
       {"lr0", c.lr0},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"adam_eps", c.adam_eps},
       {"batch_size", c.batch_size},
       {"segment_len", c.segment_len},
       {"pairing", to_string(c.pairing)},
       {"seed", c.seed},
       {"domains", domains},
       {"weights", weights_to_json(c.weights)},
       {"generator", c.generator},
       {"wave_discriminator", c.wave_discriminator},
       {"spectral_discriminator", c.spectral_discriminator},
       {"frontend", frontend_to_json(c.frontend)},
       {"log_interval", c.log_interval},
       {"checkpoint_interval", c.checkpoint_interval}};
}

void from_json(const json& j, TrainConfig& c) {
  require_known_keys(j,
                     {"total_iters", "warm_iters", "lr0", "beta1", "beta2", "adam_eps", "batch_size", "segment_len",
                      "pairing", "seed", "domains", "weights", "generator", "wave_discriminator",
                      "spectral_discriminator", "frontend", "log_interval", "checkpoint_interval"},
                     "train");
  read(j, "total_iters", c.total_iters);
  read(j, "warm_iters", c.warm_iters);
  read(j, "lr0", c.lr0);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "adam_eps", c.adam_eps);
  read(j, "batch_size", c.batch_size);
  read(j, "segment_len", c.segment_len);
  if (j.contains("pairing")) c.pairing = parse_pairing(j.at("pairing").get<std::string>());
  read(j, "seed", c.seed);
  if (j.contains("domains")) {
    c.domains.clear();
    for (const auto& d : j.at("domains")) c.domains.push_back(models::parse_domain(d.get<std::string>()));
  }
  if (j.contains("weights")) c.weights = weights_from_json(j.at("weights"));
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    require_known_keys(g, {"arch", "layers", "leaky_slope", "input_skip", "linear"}, "train.generator");
    c.generator = g.get<models::GeneratorConfig>();
  }
  auto read_disc = [&](const char* key, models::DiscriminatorConfig& out) {
    if (!j.contains(key)) return;
    const auto& d = j.at(key);
    require_known_keys(d, {"domain", "channels", "kernel", "dilations", "strides", "head_kernel", "leaky_slope",
                           "variant"},
                       std::string("train.") + key);
    out = d.get<models::DiscriminatorConfig>();
  };
  read_disc("wave_discriminator", c.wave_discriminator);
  read_disc("spectral_discriminator", c.spectral_discriminator);
  if (j.contains("frontend")) c.frontend = frontend_from_json(j.at("frontend"));
  read(j, "log_interval", c.log_interval);
  read(j, "checkpoint_interval", c.checkpoint_interval);
}

}  // namespace postfilter::trainer
