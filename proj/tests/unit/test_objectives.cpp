#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "param_check.hpp"
#include "postfilter/autodiff/ops.hpp"
#include "postfilter/objectives/losses.hpp"

using namespace postfilter;
using namespace postfilter::objectives;
using ad::Shape;
using ad::SignalTensor;
using models::Binding;

namespace {

const double kLogHalf = std::log(0.5);

Var constant_scores(Graph& g, std::size_t batch, double value) {
  return g.constant(SignalTensor(Shape{batch}, value));
}

Critic constant_critic(Domain domain, double value) {
  return {domain, [value](Graph& g, Var w) { return constant_scores(g, w.shape()[0], value); }};
}

WaveMap identity_map() {
  return [](Graph&, Var w) { return w; };
}

Var batch(Graph& g, std::vector<double> values, std::size_t items) {
  const std::size_t len = values.size() / items;
  return g.constant(SignalTensor(Shape{items, 1, len}, std::move(values)));
}

Var random_batch(Graph& g, std::uint64_t seed, std::size_t items, std::size_t len, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  return batch(g, oracle::random_vector(rng, items * len, scale), items);
}

models::DiscriminatorConfig tiny_critic(Domain domain) {
  auto c = domain == Domain::wave ? models::wave_discriminator_config()
                                  : models::spectral_discriminator_config(domain);
  c.channels = 3;
  c.kernel = domain == Domain::wave ? 5 : 3;
  c.dilations = {1, 2};
  return c;
}

dsp::FrontendConfig tiny_frontend() {
  dsp::FrontendConfig f;
  f.sample_rate = 8000.0;
  f.frame_len = 32;
  f.hop = 16;
  f.fft_size = 32;
  f.n_mels = 5;
  f.n_ceps = 4;
  return f;
}

models::GeneratorConfig tiny_generator() {
  models::V2Options o;
  o.entry_channels = 2;
  o.channels = 3;
  o.kernel = 3;
  o.blocks = 1;
  auto c = models::generator_v2_config(o);
  c.input_skip = true;
  return c;
}

void randomize(models::ParameterList& params, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  for (auto& p : params) {
    const auto v = oracle::random_vector(rng, p.tensor.size(), scale);
    std::copy(v.begin(), v.end(), p.tensor.values().begin());
  }
}

}  // namespace

TEST(Adversarial, UninformativeCriticAnchor) {
  Graph g;
  Var half = constant_scores(g, 4, 0.5);
  EXPECT_NEAR(adversarial_loss(half, half, Side::discriminator, AdversarialVariant::log).value().item(),
              -1.386294, 1e-6);
  EXPECT_NEAR(adversarial_loss(half, half, Side::discriminator, AdversarialVariant::log).value().item(),
              2.0 * kLogHalf, 1e-12);
  EXPECT_NEAR(adversarial_loss(half, half, Side::discriminator, AdversarialVariant::least_squares).value().item(),
              0.5, 1e-15);
  EXPECT_NEAR(adversarial_loss(half, half, Side::generator, AdversarialVariant::log).value().item(), -kLogHalf,
              1e-15);
  EXPECT_NEAR(adversarial_loss(half, half, Side::generator, AdversarialVariant::least_squares).value().item(), 0.25,
              1e-15);
}

TEST(Adversarial, PerfectCriticReachesZeroAndFloorsStayFinite) {
  Graph g;
  Var ones = constant_scores(g, 3, 1.0);
  Var zeros = constant_scores(g, 3, 0.0);
  EXPECT_EQ(adversarial_loss(ones, zeros, Side::discriminator, AdversarialVariant::log).value().item(), 0.0);
  const double worst = adversarial_loss(zeros, ones, Side::discriminator, AdversarialVariant::log).value().item();
  EXPECT_NEAR(worst, 2.0 * std::log(1e-8), 1e-9);
  EXPECT_TRUE(std::isfinite(adversarial_loss(zeros, zeros, Side::generator, AdversarialVariant::log).value().item()));
}

TEST(Adversarial, EmptyBatchIsRejected) {
  Graph g;
  Var empty = g.constant(SignalTensor(Shape{0}));
  Var half = constant_scores(g, 2, 0.5);
  EXPECT_THROW(adversarial_loss(empty, half, Side::discriminator, AdversarialVariant::log), ContractViolation);
  EXPECT_THROW(adversarial_loss(half, empty, Side::generator, AdversarialVariant::log), ContractViolation);
}

TEST(Adversarial, MultiDomainSumsDomains) {
  Graph g;
  Var real = random_batch(g, 1, 2, 64);
  Var fake = random_batch(g, 2, 2, 64);
  std::vector<Critic> wave_only{constant_critic(Domain::wave, 0.5)};
  const double single =
      adversarial_loss(g, wave_only[0], real, fake, Side::discriminator, AdversarialVariant::log).value().item();
  EXPECT_EQ(multidomain_adversarial_loss(g, wave_only, real, fake, Side::discriminator, AdversarialVariant::log)
                .value()
                .item(),
            single);
  std::vector<Critic> both{constant_critic(Domain::wave, 0.5), constant_critic(Domain::msp, 0.5)};
  EXPECT_NEAR(
      multidomain_adversarial_loss(g, both, real, fake, Side::discriminator, AdversarialVariant::log).value().item(),
      -2.772589, 1e-6);
  std::vector<Critic> spectral_first{constant_critic(Domain::msp, 0.5)};
  EXPECT_THROW(
      multidomain_adversarial_loss(g, spectral_first, real, fake, Side::discriminator, AdversarialVariant::log),
      ContractViolation);
}

TEST(Adversarial, SpectralTermChangesGeneratorGradient) {
  models::GeneratorNet gen(tiny_generator(), 1);
  randomize(gen.params(), 1, 0.4);
  models::DiscriminatorNet d_wave(tiny_critic(Domain::wave), std::nullopt, 2);
  models::DiscriminatorNet d_msp(tiny_critic(Domain::msp), tiny_frontend(), 3);
  std::vector<Critic> critics{
      {Domain::wave, [&](Graph& g, Var w) { return d_wave.forward(g, w, Binding::frozen); }},
      {Domain::msp, [&](Graph& g, Var w) { return d_msp.forward(g, w, Binding::frozen); }}};
  auto gradients = [&](std::size_t n_critics) {
    gen.params().zero_grad();
    Graph g;
    Var x = random_batch(g, 4, 2, 96);
    Var y = random_batch(g, 5, 2, 96);
    Var fake = gen.forward(g, x);
    g.backward(multidomain_adversarial_loss(g, std::span(critics).first(n_critics), y, fake, Side::generator,
                                            AdversarialVariant::log));
    std::vector<double> all;
    for (auto& p : gen.params()) all.insert(all.end(), p.tensor.grad().begin(), p.tensor.grad().end());
    return all;
  };
  const auto wave_only = gradients(1);
  const auto with_msp = gradients(2);
  double diff = 0.0;
  for (std::size_t i = 0; i < wave_only.size(); ++i) diff = std::max(diff, std::abs(wave_only[i] - with_msp[i]));
  EXPECT_GT(diff, 1e-8);
}

TEST(Cycle, IdentityAndNegationClose) {
  Graph g;
  Var x = random_batch(g, 1, 2, 50);
  Var y = random_batch(g, 2, 2, 50);
  EXPECT_EQ(cycle_loss(g, identity_map(), identity_map(), x, y).value().item(), 0.0);
  WaveMap negate = [](Graph&, Var w) { return ad::scale(w, -1.0); };
  EXPECT_EQ(cycle_loss(g, negate, negate, x, y).value().item(), 0.0);
}

TEST(Cycle, OffsetGeneratorOnUnitBatches) {
  Graph g;
  Var x = batch(g, std::vector<double>(2 * 40, 1.0), 2);
  Var y = batch(g, std::vector<double>(2 * 40, 1.0), 2);
  WaveMap shift = [](Graph&, Var w) { return ad::offset(w, 0.1); };
  EXPECT_NEAR(cycle_loss(g, shift, identity_map(), x, y).value().item(), 0.2, 1e-15);
}

TEST(Identity, HandEvaluatedValues) {
  Graph g;
  Var x = random_batch(g, 3, 2, 30);
  Var y = batch(g, std::vector<double>(2 * 30, -0.3), 2);
  EXPECT_EQ(identity_loss(g, identity_map(), identity_map(), x, y).value().item(), 0.0);
  WaveMap zero = [](Graph&, Var w) { return ad::scale(w, 0.0); };
  EXPECT_NEAR(identity_loss(g, zero, identity_map(), x, y).value().item(), 0.3, 1e-15);
}

TEST(FullObjective, Anchors) {
  Graph g;
  Var x = random_batch(g, 1, 2, 64);
  Var y = random_batch(g, 2, 2, 64);
  CycleNets nets{identity_map(), identity_map(), {constant_critic(Domain::wave, 0.5)},
                 {constant_critic(Domain::wave, 0.5)}};
  LossWeights w;
  const auto o = full_objective(g, nets, w, x, y, 0);
  EXPECT_NEAR(o.report.full, 2.0 * -1.386294, 2e-6);
  EXPECT_EQ(o.report.cyc, 0.0);
  EXPECT_EQ(o.report.id, 0.0);
  EXPECT_EQ(o.report.domains.size(), 2u);

  w.lambda_cyc = 0.0;
  w.lambda_id = 0.0;
  WaveMap shift = [](Graph&, Var v) { return ad::offset(v, 0.05); };
  CycleNets shifted{shift, shift, nets.d_y, nets.d_x};
  const auto z = full_objective(g, shifted, w, x, y, 0);
  EXPECT_GT(z.report.cyc, 0.0);
  EXPECT_EQ(z.report.full, z.report.adv_d);
}

TEST(FullObjective, RecompositionIsExactAndCutoffDropsIdentity) {
  models::GeneratorNet gxy(tiny_generator(), 1), gyx(tiny_generator(), 2);
  randomize(gxy.params(), 1, 0.4);
  randomize(gyx.params(), 2, 0.4);
  models::DiscriminatorNet dy(tiny_critic(Domain::wave), std::nullopt, 3), dx(tiny_critic(Domain::wave), std::nullopt, 4);
  models::DiscriminatorNet dy_msp(tiny_critic(Domain::msp), tiny_frontend(), 5);
  models::DiscriminatorNet dx_msp(tiny_critic(Domain::msp), tiny_frontend(), 6);
  auto frozen = [](models::DiscriminatorNet& d) {
    return Critic{d.domain(), [&d](Graph& g, Var w) { return d.forward(g, w, Binding::frozen); }};
  };
  CycleNets nets{[&](Graph& g, Var w) { return gxy.forward(g, w); }, [&](Graph& g, Var w) { return gyx.forward(g, w); },
                 {frozen(dy), frozen(dy_msp)}, {frozen(dx), frozen(dx_msp)}};
  LossWeights w;
  w.id_cutoff_iter = 10;
  Graph g;
  Var x = random_batch(g, 7, 2, 96);
  Var y = random_batch(g, 8, 2, 96);
  const auto early = full_objective(g, nets, w, x, y, 9).report;
  EXPECT_EQ(early.full - (early.adv_d + early.lambda_cyc * early.cyc + early.lambda_id * early.id), 0.0);
  EXPECT_EQ(early.lambda_id, 5.0);
  EXPECT_GT(early.id, 0.0);
  EXPECT_EQ(early.domains.size(), 4u);
  double by_domain = 0.0;
  for (const auto& d : early.domains) by_domain += d.discriminator_value;
  EXPECT_NEAR(by_domain, early.adv_d, 1e-12);

  const auto late = full_objective(g, nets, w, x, y, 10).report;
  EXPECT_EQ(late.lambda_id, 0.0);
  EXPECT_EQ(late.full, late.adv_d + late.lambda_cyc * late.cyc);
  EXPECT_TRUE(std::isfinite(late.generator_loss));

  // Monotone in lambda_cyc while cyc > 0.
  LossWeights heavier = w;
  heavier.lambda_cyc = 20.0;
  const auto more = full_objective(g, nets, heavier, x, y, 10).report;
  EXPECT_GT(more.full, late.full);
}

TEST(FullObjective, GeneratorGradientMatchesFiniteDifferences) {
  models::GeneratorNet gxy(tiny_generator(), 11), gyx(tiny_generator(), 12);
  randomize(gxy.params(), 11, 0.4);
  randomize(gyx.params(), 12, 0.4);
  models::DiscriminatorNet dy(tiny_critic(Domain::wave), std::nullopt, 13), dx(tiny_critic(Domain::wave), std::nullopt, 14);
  models::DiscriminatorNet dy_msp(tiny_critic(Domain::msp), tiny_frontend(), 15);
  models::DiscriminatorNet dx_msp(tiny_critic(Domain::msp), tiny_frontend(), 16);
  auto frozen = [](models::DiscriminatorNet& d) {
    return Critic{d.domain(), [&d](Graph& g, Var w) { return d.forward(g, w, Binding::frozen); }};
  };
  CycleNets nets{[&](Graph& g, Var w) { return gxy.forward(g, w); }, [&](Graph& g, Var w) { return gyx.forward(g, w); },
                 {frozen(dy), frozen(dy_msp)}, {frozen(dx), frozen(dx_msp)}};
  std::mt19937_64 rng(17);
  const SignalTensor xb(Shape{2, 1, 64}, oracle::random_vector(rng, 128, 0.3));
  const SignalTensor yb(Shape{2, 1, 64}, oracle::random_vector(rng, 128, 0.3));
  LossWeights w;
  auto loss = [&](Graph& g) { return full_objective(g, nets, w, g.reference(xb), g.reference(yb), 0).generator_loss; };
  EXPECT_LT(oracle::param_grad_error(gxy.params(), loss), 1e-3);
  EXPECT_LT(oracle::param_grad_error(gyx.params(), loss), 1e-3);
}
