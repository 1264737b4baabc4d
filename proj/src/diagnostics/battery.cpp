#include "postfilter/diagnostics/battery.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <random>

#include "postfilter/autodiff/ops.hpp"
#include "postfilter/dsp/frontend.hpp"
#include "postfilter/models/discriminator.hpp"
#include "postfilter/models/generator.hpp"
#include "postfilter/objectives/losses.hpp"

namespace postfilter::diagnostics {
namespace {

using ad::GradCheckResult;
using ad::Graph;
using ad::Shape;
using ad::SignalTensor;
using ad::Var;

constexpr double kOpTolerance = 1e-4;
constexpr double kDeepTolerance = 1e-3;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

SignalTensor random_tensor(std::mt19937_64& rng, Shape shape, double scale = 1.0) {
  SignalTensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Values in +-[0.2, 1.2), keeping finite differences clear of kinks.
SignalTensor away_from_zero(std::mt19937_64& rng, Shape shape) {
  SignalTensor t(std::move(shape));
  std::uniform_real_distribution<double> u(0.2, 1.2);
  std::bernoulli_distribution sign(0.5);
  for (double& v : t.values()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

SignalTensor positive_tensor(std::mt19937_64& rng, Shape shape) {
  SignalTensor t(std::move(shape));
  std::uniform_real_distribution<double> u(0.3, 2.0);
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Random linear functional of `out`, so every output entry carries an O(1)
// weight in the checked scalar.
Var project(Graph& g, Var out, std::mt19937_64& rng) {
  return ad::sum(ad::mul(out, g.constant(random_tensor(rng, out.shape()))));
}

// Central differences over coordinates of `tensors` against `analytic`.
// A coordinate whose error at h exceeds kRefineAbove is measured again at
// h/10 and h/100 and keeps its smallest error: a leaky_relu or abs kink
// inside [x - h, x + h] corrupts the wider differences, a wrong backward rule
// corrupts all three. Errors are relative to max(|a|, |n|, floor) with the
// floor at 1e-6 of the largest analytic entry: a coordinate a million times
// weaker than the dominant one sits at the roundoff limit of the differences.
constexpr double kRefineAbove = 1e-6;
constexpr double kFloorFraction = 1e-6;

GradCheckResult compare_coordinates(std::vector<SignalTensor*> tensors,
                                    const std::vector<std::vector<double>>& analytic,
                                    const std::function<double()>& eval, double h) {
  double largest = 0.0;
  for (const auto& g : analytic)
    for (double v : g) largest = std::max(largest, std::fabs(v));
  const double floor = std::max(1e-8, kFloorFraction * largest);
  GradCheckResult result;
  bool first = true;
  std::size_t flat = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    SignalTensor& t = *tensors[i];
    for (std::size_t k = 0; k < t.size(); ++k, ++flat) {
      const double saved = t[k];
      const double a = analytic[i][k];
      double err = 0.0, numeric = 0.0;
      double step = h;
      for (int attempt = 0; attempt < 3; ++attempt, step /= 10.0) {
        t[k] = saved + step;
        const double up = eval();
        t[k] = saved - step;
        const double down = eval();
        t[k] = saved;
        const double n = (up - down) / (2.0 * step);
        const double e = std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), floor});
        if (attempt == 0 || e < err) {
          err = e;
          numeric = n;
        }
        if (err <= kRefineAbove) break;
      }
      if (first || err > result.max_rel_error) result = {err, flat, a, numeric};
      first = false;
    }
  }
  return result;
}

GradCheckResult check_input(const SignalTensor& point, const std::function<Var(Graph&, Var)>& body,
                            std::uint64_t projection_seed, double h = 1e-5) {
  auto scalar = [&](Graph& g, Var v) {
    auto rng = make_rng(projection_seed, 99);
    return project(g, body(g, v), rng);
  };
  SignalTensor x = point;
  x.set_requires_grad(true);
  x.clear_grad();
  {
    Graph g;
    g.backward(scalar(g, g.variable(x)));
  }
  std::vector<std::vector<double>> analytic(1, std::vector<double>(x.size(), 0.0));
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic[0].begin());
  auto eval = [&]() {
    Graph g;
    return scalar(g, g.variable(x, false)).value().item();
  };
  return compare_coordinates({&x}, analytic, eval, h);
}

struct ConvDraw {
  std::size_t batch, c_in, c_out, kernel, length;
  ad::ConvOptions opt;
};

ConvDraw draw_conv(std::mt19937_64& rng) {
  ConvDraw d{};
  d.batch = pick(rng, 1, 2);
  d.c_in = pick(rng, 1, 3);
  d.c_out = pick(rng, 1, 3);
  d.kernel = pick(rng, 1, 5);
  d.opt.dilation = pick(rng, 1, 3);
  d.opt.stride = pick(rng, 1, 2);
  d.opt.padding = pick(rng, 0, (d.kernel - 1) * d.opt.dilation);
  d.length = pick(rng, (d.kernel - 1) * d.opt.dilation + 2, 30);
  return d;
}

BatteryCase conv_case(const std::string& which) {
  return {"op.conv1d." + which, kOpTolerance, [which](std::uint64_t seed) {
            auto rng = make_rng(seed, 1);
            const ConvDraw d = draw_conv(rng);
            SignalTensor x = random_tensor(rng, {d.batch, d.c_in, d.length});
            SignalTensor w = random_tensor(rng, {d.c_out, d.c_in, d.kernel}, 0.7);
            SignalTensor b = random_tensor(rng, {d.c_out});
            if (which == "input")
              return check_input(x, [&](Graph& g, Var v) { return ad::conv1d(v, g.constant(w), g.constant(b), d.opt); }, seed);
            if (which == "weight")
              return check_input(w, [&](Graph& g, Var v) { return ad::conv1d(g.constant(x), v, g.constant(b), d.opt); }, seed);
            return check_input(b, [&](Graph& g, Var v) { return ad::conv1d(g.constant(x), g.constant(w), v, d.opt); }, seed);
          }};
}

Shape small_shape(std::mt19937_64& rng) {
  if (pick(rng, 0, 1) == 0) return {pick(rng, 1, 12)};
  return {pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 2, 8)};
}

using UnaryBody = std::function<Var(Graph&, Var, std::mt19937_64&)>;

BatteryCase unary_case(const std::string& name, std::function<SignalTensor(std::mt19937_64&, Shape)> draw,
                       UnaryBody body) {
  return {"op." + name, kOpTolerance, [draw, body](std::uint64_t seed) {
            auto rng = make_rng(seed, 2);
            const SignalTensor x = draw(rng, small_shape(rng));
            return check_input(x, [&](Graph& g, Var v) {
              auto body_rng = make_rng(seed, 3);
              return body(g, v, body_rng);
            }, seed);
          }};
}

SignalTensor uniform_draw(std::mt19937_64& rng, Shape s) { return random_tensor(rng, std::move(s)); }

std::vector<BatteryCase> op_cases() {
  std::vector<BatteryCase> cases{conv_case("input"), conv_case("weight"), conv_case("bias")};
  auto other = [](Graph& g, Var v, std::mt19937_64& rng) { return g.constant(random_tensor(rng, v.shape())); };
  cases.push_back(unary_case("add", uniform_draw, [other](Graph& g, Var v, std::mt19937_64& rng) {
    return ad::add(v, ad::add(other(g, v, rng), v));
  }));
  cases.push_back(unary_case("sub", uniform_draw, [other](Graph& g, Var v, std::mt19937_64& rng) {
    return ad::sub(other(g, v, rng), ad::scale(v, 2.0));
  }));
  cases.push_back(unary_case("mul", uniform_draw, [other](Graph& g, Var v, std::mt19937_64& rng) {
    return ad::mul(ad::mul(v, other(g, v, rng)), v);
  }));
  cases.push_back({"op.mul.broadcast", kOpTolerance, [](std::uint64_t seed) {
                     auto rng = make_rng(seed, 4);
                     const SignalTensor s = random_tensor(rng, {1});
                     const SignalTensor x = random_tensor(rng, small_shape(rng));
                     return check_input(s, [&](Graph& g, Var v) {
                       return ad::add(ad::mul(g.constant(x), v), ad::mul(v, ad::add(g.constant(x), v)));
                     }, seed);
                   }});
  cases.push_back(unary_case("scale", uniform_draw, [](Graph&, Var v, std::mt19937_64&) { return ad::scale(v, -1.7); }));
  cases.push_back(unary_case("offset", uniform_draw, [](Graph&, Var v, std::mt19937_64&) {
    return ad::mul(ad::offset(v, 0.4), v);
  }));
  cases.push_back(unary_case("leaky_relu", away_from_zero, [](Graph&, Var v, std::mt19937_64&) {
    return ad::leaky_relu(v, 0.2);
  }));
  cases.push_back(unary_case("tanh", uniform_draw, [](Graph&, Var v, std::mt19937_64&) { return ad::tanh(v); }));
  cases.push_back(unary_case("sigmoid", uniform_draw, [](Graph&, Var v, std::mt19937_64&) { return ad::sigmoid(v); }));
  cases.push_back(unary_case("abs", away_from_zero, [](Graph&, Var v, std::mt19937_64&) { return ad::abs(v); }));
  cases.push_back(unary_case("log", positive_tensor, [](Graph&, Var v, std::mt19937_64&) { return ad::log(v); }));
  cases.push_back(unary_case("log.floored", positive_tensor, [](Graph&, Var v, std::mt19937_64&) {
    return ad::log(v, 0.1);
  }));
  cases.push_back(unary_case("magnitude", away_from_zero, [](Graph& g, Var v, std::mt19937_64& rng) {
    Var c = g.constant(away_from_zero(rng, v.shape()));
    return ad::add(ad::magnitude(v, c), ad::magnitude(c, ad::scale(v, 0.5)));
  }));
  cases.push_back(unary_case("atan2", away_from_zero, [](Graph& g, Var v, std::mt19937_64& rng) {
    Var c = g.constant(away_from_zero(rng, v.shape()));
    return ad::add(ad::atan2(v, c), ad::atan2(c, ad::scale(v, 0.5)));
  }));
  cases.push_back({"op.matmul", kOpTolerance, [](std::uint64_t seed) {
                     auto rng = make_rng(seed, 5);
                     const std::size_t m = pick(rng, 1, 5), n = pick(rng, 1, 5), p = pick(rng, 1, 5);
                     const SignalTensor a = random_tensor(rng, {m, n});
                     const SignalTensor b = random_tensor(rng, {n, p});
                     const SignalTensor c = random_tensor(rng, {p, m});
                     // a enters as both the left and right operand.
                     return check_input(a, [&](Graph& g, Var v) {
                       return ad::matmul(ad::matmul(v, g.constant(b)), ad::matmul(g.constant(c), v));
                     }, seed);
                   }});
  cases.push_back(unary_case("sum", uniform_draw, [](Graph&, Var v, std::mt19937_64&) {
    return ad::mul(ad::sum(v), ad::sum(v));
  }));
  cases.push_back(unary_case("mean", uniform_draw, [](Graph&, Var v, std::mt19937_64&) {
    return ad::mul(ad::mean(v), ad::sum(v));
  }));
  cases.push_back(unary_case("mean_last_axis", uniform_draw, [](Graph&, Var v, std::mt19937_64&) {
    if (v.shape().size() == 1) v = ad::reshape(v, Shape{1, v.shape()[0]});
    return ad::tanh(ad::mean_last_axis(v));
  }));
  cases.push_back({"op.frame", kOpTolerance, [](std::uint64_t seed) {
                     auto rng = make_rng(seed, 6);
                     const std::size_t frame_len = pick(rng, 2, 8);
                     const std::size_t hop = pick(rng, 1, frame_len);
                     const std::size_t batch = pick(rng, 1, 2);
                     const SignalTensor w = random_tensor(rng, {batch, 1, frame_len + hop * pick(rng, 0, 5)});
                     return check_input(w, [&](Graph&, Var v) { return ad::tanh(ad::frame(v, frame_len, hop)); }, seed);
                   }});
  cases.push_back({"op.batch_major", kOpTolerance, [](std::uint64_t seed) {
                     auto rng = make_rng(seed, 7);
                     const std::size_t c = pick(rng, 1, 4), b = pick(rng, 1, 3), f = pick(rng, 1, 5);
                     const SignalTensor x = random_tensor(rng, {c, b * f});
                     return check_input(x, [&](Graph&, Var v) { return ad::tanh(ad::batch_major(v, b)); }, seed);
                   }});
  cases.push_back({"op.upsample_zero", kOpTolerance, [](std::uint64_t seed) {
                     auto rng = make_rng(seed, 8);
                     const SignalTensor x = random_tensor(rng, {pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 8)});
                     const std::size_t factor = pick(rng, 1, 3);
                     return check_input(x, [&](Graph&, Var v) { return ad::sigmoid(ad::upsample_zero(v, factor)); }, seed);
                   }});
  cases.push_back({"op.reshape", kOpTolerance, [](std::uint64_t seed) {
                     auto rng = make_rng(seed, 9);
                     const std::size_t a = pick(rng, 1, 4), b = pick(rng, 1, 4);
                     const SignalTensor x = random_tensor(rng, {a, b});
                     return check_input(x, [&](Graph&, Var v) { return ad::tanh(ad::reshape(v, Shape{b * a})); }, seed);
                   }});
  return cases;
}

dsp::FrontendConfig small_frontend(dsp::FeatureKind kind) {
  dsp::FrontendConfig f;
  f.sample_rate = 8000.0;
  f.frame_len = 32;
  f.hop = 16;
  f.fft_size = 32;
  f.n_mels = 8;
  f.n_ceps = 6;
  f.kind = kind;
  return f;
}

models::GeneratorConfig small_v2() {
  models::V2Options o;
  o.entry_channels = 3;
  o.channels = 4;
  o.kernel = 5;
  o.first_dilation = 2;
  o.dilation = 3;
  o.blocks = 1;
  return models::generator_v2_config(o);
}

models::GeneratorConfig small_v1() {
  models::V1Options o;
  o.entry_channels = 3;
  o.channels = 4;
  o.kernel = 5;
  o.blocks = 1;
  return models::generator_v1_config(o);
}

models::DiscriminatorConfig small_critic(models::Domain domain) {
  models::DiscriminatorConfig c;
  c.domain = domain;
  c.channels = 3;
  c.kernel = 3;
  c.dilations = {1, 2};
  c.head_kernel = 3;
  return c;
}

// Zero biases put some pre-activations exactly on the leaky_relu kink, where
// central differences and the one-sided derivative disagree.
void randomize_biases(models::ParameterList& params, std::uint64_t seed) {
  auto rng = make_rng(seed, 20);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& p : params) {
    if (p.tensor.rank() != 1) continue;
    for (double& v : p.tensor.values()) v = u(rng);
  }
}

std::unique_ptr<models::GeneratorNet> random_generator(const models::GeneratorConfig& cfg, std::uint64_t seed) {
  auto g = std::make_unique<models::GeneratorNet>(cfg, seed);
  models::randomize_weights(g->params(), seed + 1);
  randomize_biases(g->params(), seed + 2);
  return g;
}

std::unique_ptr<models::DiscriminatorNet> random_critic(models::Domain domain, std::uint64_t seed) {
  std::optional<dsp::FrontendConfig> frontend;
  if (domain != models::Domain::wave) frontend = small_frontend(dsp::FeatureKind::mel_magnitude);
  auto d = std::make_unique<models::DiscriminatorNet>(small_critic(domain), frontend, seed);
  models::randomize_weights(d->params(), seed + 1);
  randomize_biases(d->params(), seed + 2);
  return d;
}

BatteryCase generator_params_case(const std::string& arch) {
  return {"generator." + arch + ".params", kOpTolerance, [arch](std::uint64_t seed) {
            auto net = random_generator(arch == "v1" ? small_v1() : small_v2(), seed);
            auto rng = make_rng(seed, 10);
            const SignalTensor x = random_tensor(rng, {2, 1, 40}, 0.5);
            const std::uint64_t projection = rng();
            return grad_check_parameters(net->params(), [&](Graph& g) {
              auto prng = make_rng(projection, 0);
              return project(g, net->forward(g, g.constant(x)), prng);
            });
          }};
}

BatteryCase frontend_case(const std::string& name, dsp::FeatureKind kind, bool log_mel) {
  return {"frontend." + name, kOpTolerance, [kind, log_mel](std::uint64_t seed) {
            auto cfg = small_frontend(kind);
            cfg.log_mel = log_mel;
            const dsp::SpectralFrontend frontend(cfg);
            auto rng = make_rng(seed, 11);
            const SignalTensor x = random_tensor(rng, {2, 1, 80});
            return check_input(x, [&](Graph&, Var v) { return frontend.apply(v); }, seed);
          }};
}

BatteryCase critic_case(models::Domain domain) {
  return {"discriminator." + models::to_string(domain) + ".params", kOpTolerance, [domain](std::uint64_t seed) {
            auto d = random_critic(domain, seed);
            auto rng = make_rng(seed, 12);
            const SignalTensor x = random_tensor(rng, {2, 1, 96}, 0.5);
            return grad_check_parameters(d->params(), [&](Graph& g) {
              return ad::sum(ad::log(d->forward(g, g.constant(x))));
            });
          }};
}

struct ObjectiveRig {
  std::unique_ptr<models::GeneratorNet> g_xy, g_yx;
  std::vector<std::unique_ptr<models::DiscriminatorNet>> d_y, d_x;
  SignalTensor x, y;
  objectives::LossWeights weights;

  explicit ObjectiveRig(std::uint64_t seed) {
    g_xy = random_generator(small_v2(), seed * 8 + 1);
    g_yx = random_generator(small_v2(), seed * 8 + 2);
    d_y.push_back(random_critic(models::Domain::wave, seed * 8 + 3));
    d_y.push_back(random_critic(models::Domain::msp, seed * 8 + 4));
    d_x.push_back(random_critic(models::Domain::wave, seed * 8 + 5));
    d_x.push_back(random_critic(models::Domain::msp, seed * 8 + 6));
    auto rng = make_rng(seed, 13);
    x = random_tensor(rng, {2, 1, 64}, 0.5);
    y = random_tensor(rng, {2, 1, 64}, 0.5);
  }

  objectives::CycleNets nets(models::Binding generators, models::Binding critics) {
    objectives::CycleNets n;
    n.g_xy = [this, generators](Graph& g, Var w) { return g_xy->forward(g, w, generators); };
    n.g_yx = [this, generators](Graph& g, Var w) { return g_yx->forward(g, w, generators); };
    for (auto& d : d_y) n.d_y.push_back({d->domain(), [p = d.get(), critics](Graph& g, Var w) { return p->forward(g, w, critics); }});
    for (auto& d : d_x) n.d_x.push_back({d->domain(), [p = d.get(), critics](Graph& g, Var w) { return p->forward(g, w, critics); }});
    return n;
  }
};

std::vector<BatteryCase> composite_cases() {
  std::vector<BatteryCase> cases;
  cases.push_back({"generator.v2.input", kOpTolerance, [](std::uint64_t seed) {
                     auto net = random_generator(small_v2(), seed);
                     auto rng = make_rng(seed, 14);
                     const SignalTensor x = random_tensor(rng, {2, 1, 40}, 0.5);
                     return check_input(x, [&](Graph& g, Var v) { return net->forward(g, v, models::Binding::frozen); }, seed);
                   }});
  cases.push_back(generator_params_case("v2"));
  cases.push_back(generator_params_case("v1"));
  cases.push_back(frontend_case("msp", dsp::FeatureKind::mel_magnitude, false));
  cases.push_back(frontend_case("msp.log", dsp::FeatureKind::mel_magnitude, true));
  cases.push_back(frontend_case("mfcc", dsp::FeatureKind::mfcc, false));
  cases.push_back(frontend_case("phase", dsp::FeatureKind::phase, false));
  cases.push_back(critic_case(models::Domain::wave));
  cases.push_back(critic_case(models::Domain::msp));
  cases.push_back({"objective.generator_loss", kDeepTolerance, [](std::uint64_t seed) {
                     ObjectiveRig rig(seed);
                     const auto nets = rig.nets(models::Binding::trainable, models::Binding::frozen);
                     return grad_check_parameters(rig.g_xy->params(), [&](Graph& g) {
                       return full_objective(g, nets, rig.weights, g.constant(rig.x), g.constant(rig.y), 0).generator_loss;
                     });
                   }});
  cases.push_back({"objective.discriminator_loss", kDeepTolerance, [](std::uint64_t seed) {
                     ObjectiveRig rig(seed);
                     const auto nets = rig.nets(models::Binding::frozen, models::Binding::trainable);
                     return grad_check_parameters(rig.d_y[1]->params(), [&](Graph& g) {
                       return full_objective(g, nets, rig.weights, g.constant(rig.x), g.constant(rig.y), 0)
                           .discriminator_loss;
                     });
                   }});
  return cases;
}

}  // namespace

GradCheckResult grad_check_parameters(models::ParameterList& params, const std::function<Var(Graph&)>& loss,
                                      double h) {
  params.zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }
  std::vector<SignalTensor*> tensors;
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    std::vector<double> grad(p.tensor.size(), 0.0);
    if (p.tensor.has_grad()) std::copy(p.tensor.grad().begin(), p.tensor.grad().end(), grad.begin());
    analytic.push_back(std::move(grad));
    tensors.push_back(&p.tensor);
  }
  auto eval = [&]() {
    Graph g;
    return loss(g).value().item();
  };
  const GradCheckResult result = compare_coordinates(tensors, analytic, eval, h);
  params.zero_grad();
  return result;
}

std::vector<BatteryCase> autodiff_battery() {
  auto cases = op_cases();
  for (auto& c : composite_cases()) cases.push_back(std::move(c));
  return cases;
}

std::vector<BatteryOutcome> run_battery(std::size_t seeds, std::uint64_t first_seed, const std::string& filter) {
  std::vector<BatteryOutcome> out;
  for (const auto& c : autodiff_battery()) {
    if (!c.name.starts_with(filter)) continue;
    BatteryOutcome o;
    o.name = c.name;
    o.tolerance = c.tolerance;
    const auto start = std::chrono::steady_clock::now();
    for (std::uint64_t s = first_seed; s < first_seed + seeds; ++s) {
      const GradCheckResult r = c.run(s);
      if (o.seeds == 0 || r.max_rel_error > o.worst.max_rel_error || std::isnan(r.max_rel_error)) {
        o.worst = r;
        o.worst_seed = s;
      }
      ++o.seeds;
    }
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(o));
  }
  return out;
}

io::CsvTable battery_table(const std::vector<BatteryOutcome>& outcomes) {
  io::CsvTable t({"case", "tolerance", "seeds", "max_rel_error", "worst_seed", "seconds", "passed"});
  for (const auto& o : outcomes) {
    t.add_row({o.name, io::format_double(o.tolerance), std::to_string(o.seeds), io::format_double(o.worst.max_rel_error),
               std::to_string(o.worst_seed), io::format_double(o.seconds), o.passed() ? "1" : "0"});
  }
  return t;
}

}  // namespace postfilter::diagnostics
