#include "postfilter/models/discriminator.hpp"

#include <cmath>

#include "postfilter/autodiff/ops.hpp"

namespace postfilter::models {

using ad::Graph;
using ad::Var;

std::string to_string(Domain domain) {
  switch (domain) {
    case Domain::wave: return "wave";
    case Domain::msp: return "msp";
    case Domain::mfcc: return "mfcc";
    case Domain::phase: return "phase";
  }
  return "unknown";
}

Domain parse_domain(const std::string& name) {
  if (name == "wave") return Domain::wave;
  if (name == "msp") return Domain::msp;
  if (name == "mfcc") return Domain::mfcc;
  if (name == "phase" || name == "ph") return Domain::phase;
  throw ContractViolation("unknown discriminator domain '" + name + "' (expected wave, msp, mfcc or phase)");
}

std::string to_string(AdversarialVariant variant) {
  return variant == AdversarialVariant::log ? "log" : "least_squares";
}

AdversarialVariant parse_variant(const std::string& name) {
  if (name == "log") return AdversarialVariant::log;
  if (name == "least_squares" || name == "ls") return AdversarialVariant::least_squares;
  throw ContractViolation("unknown adversarial variant '" + name + "' (expected log or least_squares)");
}

DiscriminatorConfig wave_discriminator_config() { return DiscriminatorConfig{}; }

DiscriminatorConfig spectral_discriminator_config(Domain domain) {
  DiscriminatorConfig c;
  c.domain = domain;
  c.kernel = 5;
  c.dilations = {1, 1, 1};
  return c;
}

namespace {

dsp::FeatureKind feature_kind(Domain domain) {
  switch (domain) {
    case Domain::msp: return dsp::FeatureKind::mel_magnitude;
    case Domain::mfcc: return dsp::FeatureKind::mfcc;
    default: return dsp::FeatureKind::phase;
  }
}

}  // namespace

DiscriminatorNet::DiscriminatorNet(DiscriminatorConfig config, std::optional<dsp::FrontendConfig> frontend,
                                   std::uint64_t seed)
    : config_(std::move(config)) {
  if (config_.dilations.empty()) throw ContractViolation("discriminator: need at least one conv layer");
  if (!config_.strides.empty() && config_.strides.size() != config_.dilations.size()) {
    throw ContractViolation("discriminator: strides must match dilations in length");
  }
  if (config_.kernel % 2 == 0 || config_.head_kernel % 2 == 0) {
    throw ContractViolation("discriminator: kernels must be odd");
  }
  std::size_t in = 1;
  if (config_.domain != Domain::wave) {
    if (!frontend) {
      throw ContractViolation("discriminator: domain " + to_string(config_.domain) + " requires a frontend");
    }
    frontend->kind = feature_kind(config_.domain);
    frontend_ = std::make_shared<const dsp::SpectralFrontend>(*frontend);
    in = frontend_->coefficient_count();
  }
  UniformInit init(seed);
  auto make = [&](const std::string& name, std::size_t out, std::size_t cin, std::size_t kernel,
                  std::size_t dilation, std::size_t stride) {
    Conv c{params_.add(name + ".weight", Shape{out, cin, kernel}), params_.add(name + ".bias", Shape{out}),
           dilation, stride};
    init.fill(params_.tensor(c.weight), 1.0 / std::sqrt(static_cast<double>(cin * kernel)));
    return c;
  };
  for (std::size_t i = 0; i < config_.dilations.size(); ++i) {
    const std::size_t stride = config_.strides.empty() ? 1 : config_.strides[i];
    layers_.push_back(make("layer" + std::to_string(i), config_.channels, in, config_.kernel,
                           config_.dilations[i], stride));
    in = config_.channels;
  }
  head_ = make("head", 1, in, config_.head_kernel, 1, 1);
}

Var DiscriminatorNet::forward(Graph& graph, Var wave, Binding binding) {
  if (config_.domain == Domain::wave) return score(graph, wave, binding);
  return score(graph, frontend_->apply(wave), binding);
}

Var DiscriminatorNet::score(Graph& graph, Var input, Binding binding) {
  if (!params_.all_finite()) throw ContractViolation("discriminator: non-finite parameter values");
  auto bind = [&](std::size_t idx) {
    return binding == Binding::trainable ? graph.variable(params_.tensor(idx)) : graph.reference(params_.tensor(idx));
  };
  Var h = input;
  for (const Conv& c : layers_) {
    const std::size_t pad = (config_.kernel - 1) * c.dilation / 2;
    h = ad::leaky_relu(ad::conv1d(h, bind(c.weight), bind(c.bias), {c.stride, c.dilation, pad}),
                       config_.leaky_slope);
  }
  h = ad::conv1d(h, bind(head_.weight), bind(head_.bias), {1, 1, (config_.head_kernel - 1) / 2});
  const auto& shape = h.shape();
  const std::size_t batch = shape.size() == 3 ? shape[0] : 1;
  h = ad::reshape(h, Shape{batch, shape.back()});
  if (config_.variant == AdversarialVariant::log) h = ad::sigmoid(h);
  return ad::mean_last_axis(h);
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"domain", to_string(c.domain)},
       {"channels", c.channels},
       {"kernel", c.kernel},
       {"dilations", c.dilations},
       {"strides", c.strides},
       {"head_kernel", c.head_kernel},
       {"leaky_slope", c.leaky_slope},
       {"variant", to_string(c.variant)}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  c.domain = parse_domain(j.at("domain").get<std::string>());
  c.channels = j.at("channels").get<std::size_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  c.dilations = j.at("dilations").get<std::vector<std::size_t>>();
  c.strides = j.at("strides").get<std::vector<std::size_t>>();
  c.head_kernel = j.at("head_kernel").get<std::size_t>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
}

}  // namespace postfilter::models
