#include "postfilter/models/generator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "postfilter/autodiff/ops.hpp"

namespace postfilter::models {

using ad::Graph;
using ad::Var;

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::projection: return "projection";
    case LayerKind::residual_block: return "residual_block";
    case LayerKind::strided_down: return "strided_down";
    case LayerKind::strided_up: return "strided_up";
  }
  return "unknown";
}

LayerKind parse_layer_kind(const std::string& name) {
  if (name == "projection") return LayerKind::projection;
  if (name == "residual_block") return LayerKind::residual_block;
  if (name == "strided_down") return LayerKind::strided_down;
  if (name == "strided_up") return LayerKind::strided_up;
  throw ContractViolation("unknown layer kind '" + name + "'");
}

GeneratorConfig generator_v2_config(const V2Options& o) {
  GeneratorConfig c;
  c.arch = "v2";
  c.layers.push_back({LayerKind::projection, o.entry_channels, o.kernel, 1, 1});
  c.layers.push_back({LayerKind::residual_block, o.channels, o.kernel, o.first_dilation, 1});
  for (std::size_t i = 0; i < o.blocks; ++i)
    c.layers.push_back({LayerKind::residual_block, o.channels, o.kernel, o.dilation, 1});
  c.layers.push_back({LayerKind::projection, 1, o.kernel, 1, 1});
  return c;
}

GeneratorConfig generator_v1_config(const V1Options& o) {
  GeneratorConfig c;
  c.arch = "v1";
  c.layers.push_back({LayerKind::projection, o.entry_channels, o.kernel, 1, 1});
  c.layers.push_back({LayerKind::strided_down, o.channels, o.kernel, 1, 2});
  c.layers.push_back({LayerKind::strided_down, o.channels, o.kernel, 1, 2});
  for (std::size_t i = 0; i < o.blocks; ++i)
    c.layers.push_back({LayerKind::residual_block, o.channels, o.kernel, 1, 1});
  c.layers.push_back({LayerKind::strided_up, o.channels, o.kernel, 1, 2});
  c.layers.push_back({LayerKind::strided_up, o.channels, o.kernel, 1, 2});
  c.layers.push_back({LayerKind::projection, 1, o.kernel, 1, 1});
  return c;
}

ReceptiveField receptive_field(const std::vector<LayerSpec>& layers) {
  double span = 1.0;
  double jump = 1.0;
  bool exact = true;
  for (const auto& l : layers) {
    const double reach = static_cast<double>((l.kernel - 1) * l.dilation);
    switch (l.kind) {
      case LayerKind::projection:
      case LayerKind::residual_block:
        span += reach * jump;
        break;
      case LayerKind::strided_down:
        span += reach * jump;
        jump *= static_cast<double>(l.stride);
        exact = exact && l.stride == 1;
        break;
      case LayerKind::strided_up:
        jump /= static_cast<double>(l.stride);
        span += reach * jump;
        exact = exact && l.stride == 1;
        break;
    }
  }
  return {static_cast<std::size_t>(std::ceil(span)), exact};
}

namespace {

void validate(const GeneratorConfig& c) {
  if (c.layers.size() < 2) throw ContractViolation("generator: need at least two layers");
  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    const auto& l = c.layers[i];
    const std::string where = "generator layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    if (l.kernel % 2 == 0) throw ContractViolation(where + ": kernel must be odd, got " + std::to_string(l.kernel));
    if (l.dilation < 1 || l.stride < 1 || l.channels < 1) {
      throw ContractViolation(where + ": channels, dilation and stride must be positive");
    }
    const bool resampling = l.kind == LayerKind::strided_down || l.kind == LayerKind::strided_up;
    if (!resampling && l.stride != 1) throw ContractViolation(where + ": stride must be 1");
  }
  if (c.layers.back().kind != LayerKind::projection || c.layers.back().channels != 1) {
    throw ContractViolation("generator: last layer must be a 1-channel projection");
  }
}

std::size_t same_padding(const LayerSpec& l) { return (l.kernel - 1) * l.dilation / 2; }

}  // namespace

GeneratorNet::GeneratorNet(GeneratorConfig config, std::uint64_t seed) : config_(std::move(config)) {
  validate(config_);
  UniformInit init(seed);
  std::size_t in = 1;
  auto make_conv = [&](const std::string& name, std::size_t out, std::size_t cin, std::size_t kernel,
                       bool zero) {
    Conv c;
    c.weight = params_.add(name + ".weight", Shape{out, cin, kernel});
    c.bias = params_.add(name + ".bias", Shape{out});
    if (!zero) init.fill(params_.tensor(c.weight), 1.0 / std::sqrt(static_cast<double>(cin * kernel)));
    return c;
  };
  for (std::size_t i = 0; i < config_.layers.size(); ++i) {
    const auto& l = config_.layers[i];
    const std::string prefix = "layer" + std::to_string(i);
    const bool last = i + 1 == config_.layers.size();
    Stage s;
    s.spec = l;
    s.in_channels = in;
    s.main = make_conv(prefix + (l.kind == LayerKind::residual_block ? ".dilated" : ".conv"), l.channels, in,
                       l.kernel, last);
    if (l.kind == LayerKind::residual_block) {
      s.pointwise = make_conv(prefix + ".pointwise", l.channels, l.channels, 1, false);
      if (in != l.channels) {
        s.skip = make_conv(prefix + ".skip", l.channels, in, 1, false);
        s.has_skip = true;
      }
    }
    if (l.kind == LayerKind::strided_down) length_multiple_ *= l.stride;
    stages_.push_back(s);
    in = l.channels;
  }
}

Var GeneratorNet::forward(Graph& graph, Var wave, Binding binding) { return run(graph, wave, binding); }

Var GeneratorNet::run(Graph& graph, Var wave, Binding binding) const {
  if (!params_.all_finite()) throw ContractViolation("generator: non-finite parameter values");
  const auto& shape = wave.shape();
  const bool ok = (shape.size() == 2 && shape[0] == 1) || (shape.size() == 3 && shape[1] == 1);
  if (!ok) throw ContractViolation("generator: expected [1 x T] or [B x 1 x T], got " + ad::to_string(shape));
  const std::size_t length = shape.back();
  if (length == 0 || length % length_multiple_ != 0) {
    throw ContractViolation("generator: input length " + std::to_string(length) + " must be a positive multiple of " +
                            std::to_string(length_multiple_));
  }
  auto bind = [&](std::size_t idx) {
    // Trainable leaves write gradients into the parameter tensors; the
    // const_cast is confined to that case.
    auto& t = const_cast<SignalTensor&>(params_.tensor(idx));
    return binding == Binding::trainable ? graph.variable(t) : graph.reference(t);
  };
  auto conv = [&](Var x, const Conv& c, const ad::ConvOptions& opt) {
    return ad::conv1d(x, bind(c.weight), bind(c.bias), opt);
  };
  auto act = [&](Var x) { return config_.linear ? x : ad::leaky_relu(x, config_.leaky_slope); };

  Var h = wave;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const Stage& s = stages_[i];
    const LayerSpec& l = s.spec;
    const std::size_t pad = same_padding(l);
    switch (l.kind) {
      case LayerKind::projection:
        h = conv(h, s.main, {1, l.dilation, pad});
        break;
      case LayerKind::residual_block: {
        Var inner = act(conv(h, s.main, {1, l.dilation, pad}));
        inner = conv(inner, s.pointwise, {});
        Var skip = s.has_skip ? conv(h, s.skip, {}) : h;
        h = ad::add(skip, inner);
        break;
      }
      case LayerKind::strided_down:
        h = act(conv(h, s.main, {l.stride, l.dilation, pad}));
        break;
      case LayerKind::strided_up:
        h = act(conv(ad::upsample_zero(h, l.stride), s.main, {1, l.dilation, pad}));
        break;
    }
  }
  if (config_.input_skip) h = ad::add(h, wave);
  return config_.linear ? h : ad::tanh(h);
}

std::vector<double> GeneratorNet::infer(std::span<const double> wave) const {
  Graph graph;
  Var x = graph.constant(SignalTensor(Shape{1, wave.size()}, std::vector<double>(wave.begin(), wave.end())));
  Var y = run(graph, x, Binding::frozen);
  auto v = y.value().values();
  return {v.begin(), v.end()};
}

std::vector<double> GeneratorNet::infer_chunked(std::span<const double> wave, std::size_t chunk) const {
  if (chunk == 0) throw ContractViolation("generator: chunk size must be positive");
  const auto rf = receptive_field();
  if (!rf.exact || chunk >= wave.size()) return infer(wave);
  const std::size_t context = rf.samples - 1;
  std::vector<double> out(wave.size());
  for (std::size_t start = 0; start < wave.size(); start += chunk) {
    const std::size_t stop = std::min(wave.size(), start + chunk);
    const std::size_t lo = start > context ? start - context : 0;
    const std::size_t hi = std::min(wave.size(), stop + context);
    const auto y = infer(wave.subspan(lo, hi - lo));
    std::copy(y.begin() + static_cast<std::ptrdiff_t>(start - lo), y.begin() + static_cast<std::ptrdiff_t>(stop - lo),
              out.begin() + static_cast<std::ptrdiff_t>(start));
  }
  return out;
}

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = {{"kind", to_string(s.kind)},
       {"channels", s.channels},
       {"kernel", s.kernel},
       {"dilation", s.dilation},
       {"stride", s.stride}};
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  s.kind = parse_layer_kind(j.at("kind").get<std::string>());
  s.channels = j.at("channels").get<std::size_t>();
  s.kernel = j.at("kernel").get<std::size_t>();
  s.dilation = j.at("dilation").get<std::size_t>();
  s.stride = j.at("stride").get<std::size_t>();
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"arch", c.arch},
       {"layers", c.layers},
       {"leaky_slope", c.leaky_slope},
       {"input_skip", c.input_skip},
       {"linear", c.linear}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  c.arch = j.at("arch").get<std::string>();
  c.layers = j.at("layers").get<std::vector<LayerSpec>>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.input_skip = j.at("input_skip").get<bool>();
  c.linear = j.at("linear").get<bool>();
}

}  // namespace postfilter::models
