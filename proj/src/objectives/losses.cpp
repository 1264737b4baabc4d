#include "postfilter/objectives/losses.hpp"

#include <cmath>

#include "postfilter/autodiff/ops.hpp"

namespace postfilter::objectives {

namespace {

void require_batch(Var v, const char* what) {
  if (v.value().empty()) throw ContractViolation(std::string("adversarial loss: empty ") + what + " batch");
}

Var mean_log(Var scores, double eps) { return ad::mean(ad::log(scores, eps)); }

Var mean_square_to(Var scores, double target) {
  Var d = ad::offset(scores, -target);
  return ad::mean(ad::mul(d, d));
}

}  // namespace

Var adversarial_loss(Var real_scores, Var fake_scores, Side side, AdversarialVariant variant, double eps) {
  require_batch(fake_scores, "fake");
  if (side == Side::generator) {
    if (variant == AdversarialVariant::log) return ad::scale(mean_log(fake_scores, eps), -1.0);
    return mean_square_to(fake_scores, 1.0);
  }
  require_batch(real_scores, "real");
  if (variant == AdversarialVariant::log) {
    Var one_minus_fake = ad::offset(ad::scale(fake_scores, -1.0), 1.0);
    return ad::add(mean_log(real_scores, eps), mean_log(one_minus_fake, eps));
  }
  return ad::add(mean_square_to(real_scores, 1.0), mean_square_to(fake_scores, 0.0));
}

Var adversarial_loss(Graph& graph, const Critic& critic, Var real, Var fake, Side side, AdversarialVariant variant,
                     double eps) {
  require_batch(fake, "fake");
  Var fake_scores = critic.score(graph, fake);
  if (side == Side::generator) return adversarial_loss(fake_scores, fake_scores, side, variant, eps);
  require_batch(real, "real");
  return adversarial_loss(critic.score(graph, real), fake_scores, side, variant, eps);
}

Var discriminator_minimand(Var value, AdversarialVariant variant) {
  return variant == AdversarialVariant::log ? ad::scale(value, -1.0) : value;
}

Var multidomain_adversarial_loss(Graph& graph, std::span<const Critic> critics, Var real, Var fake, Side side,
                                 AdversarialVariant variant, double eps) {
  if (critics.empty() || critics.front().domain != Domain::wave) {
    throw ContractViolation("multi-domain adversarial loss: the first critic must be the wave-domain one");
  }
  Var total = adversarial_loss(graph, critics.front(), real, fake, side, variant, eps);
  for (std::size_t i = 1; i < critics.size(); ++i) {
    total = ad::add(total, adversarial_loss(graph, critics[i], real, fake, side, variant, eps));
  }
  return total;
}

Var l1(Var a, Var b) { return ad::mean(ad::abs(ad::sub(a, b))); }

Var cycle_loss(Graph& graph, const WaveMap& g_xy, const WaveMap& g_yx, Var x, Var y) {
  return ad::add(l1(g_yx(graph, g_xy(graph, x)), x), l1(g_xy(graph, g_yx(graph, y)), y));
}

Var identity_loss(Graph& graph, const WaveMap& g_xy, const WaveMap& g_yx, Var x, Var y) {
  return ad::add(l1(g_xy(graph, y), y), l1(g_yx(graph, x), x));
}

GeneratorPasses run_generators(Graph& graph, const CycleNets& nets, Var x, Var y, bool with_identity) {
  GeneratorPasses p;
  p.fake_y = nets.g_xy(graph, x);
  p.fake_x = nets.g_yx(graph, y);
  p.cycle_x = nets.g_yx(graph, p.fake_y);
  p.cycle_y = nets.g_xy(graph, p.fake_x);
  if (with_identity) {
    p.ident_y = nets.g_xy(graph, y);
    p.ident_x = nets.g_yx(graph, x);
  }
  return p;
}

double recompose_full(const LossReport& r) { return r.adv_d + r.lambda_cyc * r.cyc + r.lambda_id * r.id; }

Objective full_objective(Graph& graph, const CycleNets& nets, const LossWeights& weights, Var x, Var y,
                         const GeneratorPasses& passes, std::size_t iter) {
  if (nets.d_y.empty() || nets.d_x.empty()) throw ContractViolation("full objective: both critic sets are required");
  if (nets.d_y.front().domain != Domain::wave || nets.d_x.front().domain != Domain::wave) {
    throw ContractViolation("full objective: each critic set must start with the wave-domain critic");
  }
  if (weights.lambda_cyc < 0.0 || weights.lambda_id < 0.0) {
    throw ContractViolation("full objective: loss weights must be non-negative");
  }
  Objective o;
  LossReport& r = o.report;
  r.iter = iter;
  r.lambda_cyc = weights.lambda_cyc;
  r.lambda_id = weights.lambda_id_at(iter);

  auto accumulate = [&](const std::vector<Critic>& critics, Var real, Var fake, const char* direction) {
    for (const Critic& c : critics) {
      Var fake_scores = c.score(graph, fake);
      Var real_scores = c.score(graph, real);
      Var dv = adversarial_loss(real_scores, fake_scores, Side::discriminator, weights.variant, weights.log_eps);
      Var gv = adversarial_loss(real_scores, fake_scores, Side::generator, weights.variant, weights.log_eps);
      o.adv_d = o.adv_d.valid() ? ad::add(o.adv_d, dv) : dv;
      o.adv_g = o.adv_g.valid() ? ad::add(o.adv_g, gv) : gv;
      r.domains.push_back({direction, c.domain, dv.value().item(), gv.value().item()});
    }
  };
  accumulate(nets.d_y, y, passes.fake_y, "xy");
  accumulate(nets.d_x, x, passes.fake_x, "yx");

  o.cyc = ad::add(l1(passes.cycle_x, x), l1(passes.cycle_y, y));
  if (passes.ident_y.valid() && passes.ident_x.valid()) {
    o.id = ad::add(l1(passes.ident_y, y), l1(passes.ident_x, x));
  } else {
    if (r.lambda_id != 0.0) throw ContractViolation("full objective: identity passes missing while lambda_id > 0");
    o.id = graph.constant(ad::SignalTensor::scalar(0.0));
  }
  o.generator_loss = ad::add(ad::add(o.adv_g, ad::scale(o.cyc, r.lambda_cyc)), ad::scale(o.id, r.lambda_id));
  o.discriminator_loss = discriminator_minimand(o.adv_d, weights.variant);

  r.adv_d = o.adv_d.value().item();
  r.adv_g = o.adv_g.value().item();
  r.cyc = o.cyc.value().item();
  r.id = o.id.value().item();
  r.full = recompose_full(r);
  r.generator_loss = o.generator_loss.value().item();
  r.discriminator_loss = o.discriminator_loss.value().item();
  return o;
}

Objective full_objective(Graph& graph, const CycleNets& nets, const LossWeights& weights, Var x, Var y,
                         std::size_t iter) {
  return full_objective(graph, nets, weights, x, y, run_generators(graph, nets, x, y), iter);
}

}  // namespace postfilter::objectives
