#include "postfilter/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "postfilter/autodiff/ops.hpp"

namespace postfilter::trainer {

using ad::Graph;
using ad::Shape;
using ad::SignalTensor;
using ad::Var;
using models::Binding;

double lr_schedule(std::size_t iter, std::size_t warm_iters, std::size_t total_iters, double lr0) {
  if (iter > total_iters) throw ContractViolation("lr_schedule: iter exceeds total_iters");
  if (iter < warm_iters) return lr0;
  if (iter == total_iters) return 0.0;
  return lr0 * static_cast<double>(total_iters - iter) / static_cast<double>(total_iters - warm_iters);
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t iter) {
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + iter + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Integer draw in [0, n) without the implementation-defined distributions.
std::size_t draw(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

std::vector<std::size_t> eligible(const Corpus& c, std::size_t len) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i].samples.size() >= len) out.push_back(i);
  return out;
}

void copy_segment(const Utterance& u, std::size_t offset, std::size_t len, SignalTensor& dst, std::size_t row) {
  std::copy_n(u.samples.begin() + static_cast<std::ptrdiff_t>(offset), len, dst.values().begin() + row * len);
}

}  // namespace

Batch sample_batch(const Corpus& x, const Corpus& y, const TrainConfig& config, std::size_t iter) {
  const std::size_t len = config.segment_len;
  const std::size_t b = config.batch_size;
  if (x.empty() || y.empty()) throw ContractViolation("sample_batch: empty corpus");
  std::mt19937_64 rng(mix(config.seed, iter));
  Batch batch;
  batch.x = SignalTensor(Shape{b, 1, len});
  batch.y = SignalTensor(Shape{b, 1, len});
  if (config.pairing == PairingMode::paired) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const std::size_t j = x.find(y[i].id);
      if (j == x.size()) continue;
      if (std::min(x[j].samples.size(), y[i].samples.size()) >= len) pairs.emplace_back(j, i);
    }
    if (pairs.empty()) {
      throw ContractViolation("sample_batch: no paired utterance of at least " + std::to_string(len) + " samples");
    }
    for (std::size_t k = 0; k < b; ++k) {
      const auto [xi, yi] = pairs[draw(rng, pairs.size())];
      const std::size_t span = std::min(x[xi].samples.size(), y[yi].samples.size()) - len + 1;
      const std::size_t offset = draw(rng, span);
      copy_segment(x[xi], offset, len, batch.x, k);
      copy_segment(y[yi], offset, len, batch.y, k);
      batch.x_ids.push_back(x[xi].id);
      batch.y_ids.push_back(y[yi].id);
      batch.x_offsets.push_back(offset);
      batch.y_offsets.push_back(offset);
    }
    return batch;
  }
  const auto xs = eligible(x, len);
  const auto ys = eligible(y, len);
  if (xs.empty() || ys.empty()) {
    throw ContractViolation("sample_batch: every utterance is shorter than segment_len " + std::to_string(len));
  }
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t xi = xs[draw(rng, xs.size())];
    const std::size_t xo = draw(rng, x[xi].samples.size() - len + 1);
    const std::size_t yi = ys[draw(rng, ys.size())];
    const std::size_t yo = draw(rng, y[yi].samples.size() - len + 1);
    copy_segment(x[xi], xo, len, batch.x, k);
    copy_segment(y[yi], yo, len, batch.y, k);
    batch.x_ids.push_back(x[xi].id);
    batch.y_ids.push_back(y[yi].id);
    batch.x_offsets.push_back(xo);
    batch.y_offsets.push_back(yo);
  }
  return batch;
}

Adam::Adam(models::ParameterList& params) : params_(&params) {
  for (const auto& p : params) {
    m_.emplace_back(p.tensor.shape());
    v_.emplace_back(p.tensor.shape());
  }
}

void Adam::step(double lr, double beta1, double beta2, double eps) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_->size(); ++i) {
    SignalTensor& p = params_->tensor(i);
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto m = m_[i].values();
    auto v = v_[i].values();
    auto w = p.values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
    }
  }
}

TrainState::TrainState(TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::uint64_t base = config_.seed * 0x100000001b3ULL;
  g_xy_ = std::make_unique<models::GeneratorNet>(config_.generator, base + 1);
  g_yx_ = std::make_unique<models::GeneratorNet>(config_.generator, base + 2);
  auto build_side = [&](std::vector<std::unique_ptr<models::DiscriminatorNet>>& side, std::uint64_t salt) {
    auto wave = config_.wave_discriminator;
    wave.domain = models::Domain::wave;
    wave.variant = config_.weights.variant;
    side.push_back(std::make_unique<models::DiscriminatorNet>(wave, std::nullopt, base + salt));
    for (std::size_t i = 0; i < config_.domains.size(); ++i) {
      auto spectral = config_.spectral_discriminator;
      spectral.domain = config_.domains[i];
      spectral.variant = config_.weights.variant;
      side.push_back(std::make_unique<models::DiscriminatorNet>(spectral, config_.frontend, base + salt + 1 + i));
    }
  };
  build_side(d_y_, 100);
  build_side(d_x_, 200);
  adam_g_xy_ = std::make_unique<Adam>(g_xy_->params());
  adam_g_yx_ = std::make_unique<Adam>(g_yx_->params());
  for (auto& d : d_y_) adam_d_.push_back(std::make_unique<Adam>(d->params()));
  for (auto& d : d_x_) adam_d_.push_back(std::make_unique<Adam>(d->params()));
}

std::vector<std::pair<std::string, SignalTensor*>> TrainState::named_tensors() {
  std::vector<std::pair<std::string, SignalTensor*>> out;
  auto add_net = [&](const std::string& prefix, models::ParameterList& params, Adam& adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.emplace_back(prefix + "/" + params[i].name, &params.tensor(i));
      out.emplace_back("adam_m/" + prefix + "/" + params[i].name, &adam.first_moments()[i]);
      out.emplace_back("adam_v/" + prefix + "/" + params[i].name, &adam.second_moments()[i]);
    }
  };
  add_net("g_xy", g_xy_->params(), *adam_g_xy_);
  add_net("g_yx", g_yx_->params(), *adam_g_yx_);
  for (std::size_t i = 0; i < d_y_.size(); ++i)
    add_net("d_y/" + models::to_string(d_y_[i]->domain()), d_y_[i]->params(), *adam_d_[i]);
  for (std::size_t i = 0; i < d_x_.size(); ++i)
    add_net("d_x/" + models::to_string(d_x_[i]->domain()), d_x_[i]->params(), *adam_d_[d_y_.size() + i]);
  return out;
}

objectives::CycleNets TrainState::cycle_nets(Binding critic_binding) {
  objectives::CycleNets nets;
  nets.g_xy = [this](Graph& g, Var w) { return g_xy_->forward(g, w, Binding::trainable); };
  nets.g_yx = [this](Graph& g, Var w) { return g_yx_->forward(g, w, Binding::trainable); };
  for (auto& d : d_y_) {
    models::DiscriminatorNet* net = d.get();
    nets.d_y.push_back({net->domain(), [net, critic_binding](Graph& g, Var w) {
                          return net->forward(g, w, critic_binding);
                        }});
  }
  for (auto& d : d_x_) {
    models::DiscriminatorNet* net = d.get();
    nets.d_x.push_back({net->domain(), [net, critic_binding](Graph& g, Var w) {
                          return net->forward(g, w, critic_binding);
                        }});
  }
  return nets;
}

namespace {

void require_finite(double value, const std::string& term, std::size_t iter) {
  if (!std::isfinite(value)) {
    throw TrainingError("non-finite " + term + " loss at iteration " + std::to_string(iter));
  }
}

// Updates every critic on real batches against the given (detached) fakes.
double update_discriminators(TrainState& state, const SignalTensor& real_x, const SignalTensor& real_y,
                             const SignalTensor& fake_x, const SignalTensor& fake_y, double lr) {
  const TrainConfig& c = state.config();
  Graph g;
  Var rx = g.reference(real_x), ry = g.reference(real_y);
  Var fx = g.reference(fake_x), fy = g.reference(fake_y);
  Var value;
  auto side = [&](std::vector<std::unique_ptr<models::DiscriminatorNet>>& critics, Var real, Var fake) {
    for (auto& d : critics) {
      Var real_scores = d->forward(g, real, Binding::trainable);
      Var fake_scores = d->forward(g, fake, Binding::trainable);
      Var v = objectives::adversarial_loss(real_scores, fake_scores, objectives::Side::discriminator,
                                           c.weights.variant, c.weights.log_eps);
      value = value.valid() ? ad::add(value, v) : v;
    }
  };
  side(state.d_y(), ry, fy);
  side(state.d_x(), rx, fx);
  Var loss = objectives::discriminator_minimand(value, c.weights.variant);
  const double loss_value = loss.value().item();
  require_finite(loss_value, "discriminator", state.iter());
  for (auto& d : state.d_y()) d->params().zero_grad();
  for (auto& d : state.d_x()) d->params().zero_grad();
  g.backward(loss);
  for (auto& adam : state.adam_d()) adam->step(lr, c.beta1, c.beta2, c.adam_eps);
  return loss_value;
}

}  // namespace

double discriminator_step(TrainState& state, const Batch& batch, double lr) {
  Graph g;
  Var fy = state.g_xy().forward(g, g.reference(batch.x), Binding::frozen);
  Var fx = state.g_yx().forward(g, g.reference(batch.y), Binding::frozen);
  return update_discriminators(state, batch.x, batch.y, fx.value(), fy.value(), lr);
}

StepResult train_step(TrainState& state, const Batch& batch) {
  const TrainConfig& c = state.config();
  const std::size_t iter = state.iter();
  StepResult result;
  result.lr = lr_schedule(iter, c.warm_iters, c.total_iters, c.lr0);

  Graph g;
  Var x = g.reference(batch.x);
  Var y = g.reference(batch.y);
  auto nets = state.cycle_nets(Binding::frozen);
  const bool with_identity = c.weights.lambda_id_at(iter) != 0.0;
  const auto passes = objectives::run_generators(g, nets, x, y, with_identity);

  result.discriminator_loss =
      update_discriminators(state, batch.x, batch.y, passes.fake_x.value(), passes.fake_y.value(), result.lr);

  auto objective = objectives::full_objective(g, nets, c.weights, x, y, passes, iter);
  const auto& r = objective.report;
  require_finite(r.adv_g, "generator adversarial", iter);
  require_finite(r.adv_d, "discriminator adversarial", iter);
  require_finite(r.cyc, "cycle-consistency", iter);
  require_finite(r.id, "identity", iter);
  state.g_xy().params().zero_grad();
  state.g_yx().params().zero_grad();
  g.backward(objective.generator_loss);
  state.adam_g_xy().step(result.lr, c.beta1, c.beta2, c.adam_eps);
  state.adam_g_yx().step(result.lr, c.beta1, c.beta2, c.adam_eps);

  result.report = objective.report;
  state.history().push_back(result.report);
  state.set_iter(iter + 1);
  return result;
}

namespace {

using nlohmann::json;

json report_to_json(const objectives::LossReport& r) {
  json domains = json::array();
  for (const auto& d : r.domains) {
    domains.push_back({{"direction", d.direction},
                       {"domain", models::to_string(d.domain)},
                       {"discriminator_value", d.discriminator_value},
                       {"generator_value", d.generator_value}});
  }
  return {{"iter", r.iter},
          {"adv_d", r.adv_d},
          {"adv_g", r.adv_g},
          {"cyc", r.cyc},
          {"id", r.id},
          {"lambda_cyc", r.lambda_cyc},
          {"lambda_id", r.lambda_id},
          {"full", r.full},
          {"generator_loss", r.generator_loss},
          {"discriminator_loss", r.discriminator_loss},
          {"domains", domains}};
}

objectives::LossReport report_from_json(const json& j) {
  objectives::LossReport r;
  r.iter = j.at("iter").get<std::size_t>();
  r.adv_d = j.at("adv_d").get<double>();
  r.adv_g = j.at("adv_g").get<double>();
  r.cyc = j.at("cyc").get<double>();
  r.id = j.at("id").get<double>();
  r.lambda_cyc = j.at("lambda_cyc").get<double>();
  r.lambda_id = j.at("lambda_id").get<double>();
  r.full = j.at("full").get<double>();
  r.generator_loss = j.at("generator_loss").get<double>();
  r.discriminator_loss = j.at("discriminator_loss").get<double>();
  for (const auto& d : j.at("domains")) {
    r.domains.push_back({d.at("direction").get<std::string>(), models::parse_domain(d.at("domain").get<std::string>()),
                         d.at("discriminator_value").get<double>(), d.at("generator_value").get<double>()});
  }
  return r;
}

std::string file_name(const std::string& tensor_name) {
  std::string out = tensor_name;
  std::replace(out.begin(), out.end(), '/', '~');
  return out + ".bin";
}

}  // namespace

void save_checkpoint(TrainState& state, const std::filesystem::path& dir, StorageType storage) {
  std::filesystem::create_directories(dir);
  json tensors = json::array();
  for (const auto& [name, tensor] : state.named_tensors()) {
    std::string bytes;
    if (storage == StorageType::f64) {
      bytes.resize(tensor->size() * sizeof(double));
      std::memcpy(bytes.data(), tensor->data(), bytes.size());
    } else {
      bytes.resize(tensor->size() * sizeof(float));
      for (std::size_t i = 0; i < tensor->size(); ++i) {
        const float f = static_cast<float>((*tensor)[i]);
        std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
      }
    }
    const std::string file = file_name(name);
    io::write_atomic(dir / file, bytes);
    tensors.push_back({{"name", name}, {"file", file}, {"shape", tensor->shape()}});
  }
  json adam = {{"g_xy", state.adam_g_xy().steps()}, {"g_yx", state.adam_g_yx().steps()}};
  json d_steps = json::array();
  for (auto& a : state.adam_d()) d_steps.push_back(a->steps());
  adam["d"] = d_steps;
  json history = json::array();
  for (const auto& r : state.history()) history.push_back(report_to_json(r));
  json manifest = {{"format", "postfilter-checkpoint"},
                   {"version", kCheckpointVersion},
                   {"iter", state.iter()},
                   {"storage", storage == StorageType::f64 ? "f64le" : "f32le"},
                   {"config", state.config()},
                   {"rng", {{"seed", state.config().seed}, {"next_iter", state.iter()}}},
                   {"adam_steps", adam},
                   {"tensors", tensors},
                   {"history", history}};
  io::write_atomic(dir / "manifest.json", manifest.dump(2));
}

std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& dir) {
  using Kind = CheckpointErrorKind;
  std::string text;
  try {
    text = io::read_file(dir / "manifest.json");
  } catch (const io::IoError& e) {
    throw CheckpointError(Kind::io, e.what());
  }
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::corrupt_manifest, "manifest.json does not parse: " + std::string(e.what()));
  }
  if (!manifest.is_object() || manifest.value("format", "") != "postfilter-checkpoint" ||
      !manifest.contains("version")) {
    throw CheckpointError(Kind::corrupt_manifest, "manifest.json is not a checkpoint manifest");
  }
  if (!manifest.at("version").is_number_integer() || manifest.at("version").get<int>() != kCheckpointVersion) {
    throw CheckpointError(Kind::version_mismatch, "checkpoint version " + manifest.at("version").dump() +
                                                      " is not the supported version " +
                                                      std::to_string(kCheckpointVersion));
  }
  std::unique_ptr<TrainState> state;
  std::string storage;
  json tensors;
  try {
    state = std::make_unique<TrainState>(manifest.at("config").get<TrainConfig>());
    state->set_iter(manifest.at("iter").get<std::size_t>());
    storage = manifest.at("storage").get<std::string>();
    tensors = manifest.at("tensors");
    const auto& adam = manifest.at("adam_steps");
    state->adam_g_xy().set_steps(adam.at("g_xy").get<std::size_t>());
    state->adam_g_yx().set_steps(adam.at("g_yx").get<std::size_t>());
    const auto d_steps = adam.at("d").get<std::vector<std::size_t>>();
    if (d_steps.size() != state->adam_d().size()) throw ContractViolation("critic count differs from config");
    for (std::size_t i = 0; i < d_steps.size(); ++i) state->adam_d()[i]->set_steps(d_steps[i]);
    for (const auto& r : manifest.at("history")) state->history().push_back(report_from_json(r));
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::corrupt_manifest, std::string("manifest.json: ") + e.what());
  }
  if (storage != "f64le" && storage != "f32le") {
    throw CheckpointError(Kind::corrupt_manifest, "unknown storage type '" + storage + "'");
  }
  const std::size_t width = storage == "f64le" ? sizeof(double) : sizeof(float);
  auto named = state->named_tensors();
  if (tensors.size() != named.size()) {
    throw CheckpointError(Kind::shape_mismatch, "manifest lists " + std::to_string(tensors.size()) +
                                                    " tensors, the configured model has " +
                                                    std::to_string(named.size()));
  }
  for (const auto& [name, tensor] : named) {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const json& t) { return t.value("name", "") == name; });
    if (it == tensors.end()) throw CheckpointError(Kind::shape_mismatch, "tensor '" + name + "' missing from manifest");
    Shape shape;
    std::string file;
    try {
      shape = it->at("shape").get<Shape>();
      file = it->at("file").get<std::string>();
    } catch (const json::exception& e) {
      throw CheckpointError(Kind::corrupt_manifest, "tensor entry '" + name + "': " + e.what());
    }
    if (shape != tensor->shape()) {
      throw CheckpointError(Kind::shape_mismatch, "tensor '" + name + "' has shape " + ad::to_string(shape) +
                                                      ", expected " + ad::to_string(tensor->shape()));
    }
    std::string bytes;
    try {
      bytes = io::read_file(dir / file);
    } catch (const io::IoError& e) {
      throw CheckpointError(Kind::io, e.what());
    }
    if (bytes.size() != tensor->size() * width) {
      throw CheckpointError(Kind::shape_mismatch, "tensor file " + file + " holds " + std::to_string(bytes.size()) +
                                                      " bytes, expected " + std::to_string(tensor->size() * width));
    }
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      if (width == sizeof(double)) {
        std::memcpy(&(*tensor)[i], bytes.data() + i * width, width);
      } else {
        float f;
        std::memcpy(&f, bytes.data() + i * width, width);
        (*tensor)[i] = f;
      }
    }
  }
  return state;
}

io::CsvTable loss_table(const TrainState& state) {
  std::vector<std::string> header{"iter", "lr", "adv_d", "adv_g", "cyc", "id", "full", "generator_loss",
                                  "discriminator_loss"};
  const auto& history = state.history();
  if (!history.empty()) {
    for (const auto& d : history.front().domains)
      header.push_back("adv_d_" + d.direction + "_" + models::to_string(d.domain));
  }
  io::CsvTable table(header);
  const auto& c = state.config();
  for (const auto& r : history) {
    std::vector<std::string> row{std::to_string(r.iter),
                                 io::format_double(lr_schedule(r.iter, c.warm_iters, c.total_iters, c.lr0)),
                                 io::format_double(r.adv_d),
                                 io::format_double(r.adv_g),
                                 io::format_double(r.cyc),
                                 io::format_double(r.id),
                                 io::format_double(r.full),
                                 io::format_double(r.generator_loss),
                                 io::format_double(r.discriminator_loss)};
    for (const auto& d : r.domains) row.push_back(io::format_double(d.discriminator_value));
    table.add_row(std::move(row));
  }
  return table;
}

}  // namespace postfilter::trainer
