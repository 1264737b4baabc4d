#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "postfilter/autodiff/graph.hpp"
#include "postfilter/models/discriminator.hpp"

namespace postfilter::objectives {

using ad::Graph;
using ad::Var;
using models::AdversarialVariant;
using models::Domain;

/// A waveform-to-waveform map, [B x 1 x T] -> [B x 1 x T].
using WaveMap = std::function<Var(Graph&, Var)>;

/// A critic scoring a waveform batch: [B x 1 x T] -> [B].
struct Critic {
  Domain domain = Domain::wave;
  std::function<Var(Graph&, Var)> score;
};

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;
  /// Identity term is active for iter < id_cutoff_iter.
  std::size_t id_cutoff_iter = 200;
  AdversarialVariant variant = AdversarialVariant::log;
  double log_eps = 1e-8;

  double lambda_id_at(std::size_t iter) const { return iter < id_cutoff_iter ? lambda_id : 0.0; }
};

enum class Side { discriminator, generator };

/// From critic outputs on real and fake batches ([B] each).
///   discriminator side, log: mean log D(real) + mean log(1 - D(fake))
///   generator side, log:     -mean log D(fake)
///   discriminator side, ls:  mean (D(real) - 1)^2 + mean D(fake)^2
///   generator side, ls:      mean (D(fake) - 1)^2
/// Logs are floored at eps.
Var adversarial_loss(Var real_scores, Var fake_scores, Side side, AdversarialVariant variant, double eps = 1e-8);

/// Scores `real` and `fake` with the critic, then as above.
Var adversarial_loss(Graph& graph, const Critic& critic, Var real, Var fake, Side side,
                     AdversarialVariant variant, double eps = 1e-8);

/// The quantity the discriminator minimises, given the discriminator-side
/// value: its negation for the log variant, itself for least squares.
Var discriminator_minimand(Var value, AdversarialVariant variant);

/// Sum of adversarial_loss over the critics; the first must be the wave critic.
Var multidomain_adversarial_loss(Graph& graph, std::span<const Critic> critics, Var real, Var fake, Side side,
                                 AdversarialVariant variant, double eps = 1e-8);

/// Mean absolute sample error, with x and y batches of equal shape.
Var l1(Var a, Var b);

/// mean|G_yx(G_xy(x)) - x| + mean|G_xy(G_yx(y)) - y|.
Var cycle_loss(Graph& graph, const WaveMap& g_xy, const WaveMap& g_yx, Var x, Var y);
/// mean|G_xy(y) - y| + mean|G_yx(x) - x|.
Var identity_loss(Graph& graph, const WaveMap& g_xy, const WaveMap& g_yx, Var x, Var y);

struct CycleNets {
  WaveMap g_xy;
  WaveMap g_yx;
  std::vector<Critic> d_y;  // judges G_xy(x) against y
  std::vector<Critic> d_x;  // judges G_yx(y) against x
};

/// The six generator evaluations one objective needs.
struct GeneratorPasses {
  Var fake_y;   // G_xy(x)
  Var fake_x;   // G_yx(y)
  Var cycle_x;  // G_yx(G_xy(x))
  Var cycle_y;  // G_xy(G_yx(y))
  Var ident_y;  // G_xy(y); unset when the identity term is skipped
  Var ident_x;  // G_yx(x)
};

GeneratorPasses run_generators(Graph& graph, const CycleNets& nets, Var x, Var y, bool with_identity = true);

struct DomainTerm {
  std::string direction;  // "xy" scores G_xy(x) with d_y, "yx" scores G_yx(y) with d_x
  Domain domain = Domain::wave;
  double discriminator_value = 0.0;
  double generator_value = 0.0;
};

struct LossReport {
  std::size_t iter = 0;
  /// Sum of the discriminator-side values over both directions and domains.
  double adv_d = 0.0;
  /// Sum of the generator-side values.
  double adv_g = 0.0;
  double cyc = 0.0;
  double id = 0.0;
  double lambda_cyc = 0.0;
  double lambda_id = 0.0;
  /// adv_d + lambda_cyc * cyc + lambda_id * id.
  double full = 0.0;
  /// adv_g + lambda_cyc * cyc + lambda_id * id, the quantity the generators minimise.
  double generator_loss = 0.0;
  /// What the discriminators minimise (see discriminator_minimand).
  double discriminator_loss = 0.0;
  std::vector<DomainTerm> domains;
};

/// Recomposes `full` from the report's own fields.
double recompose_full(const LossReport& report);

struct Objective {
  Var adv_d;
  Var adv_g;
  Var cyc;
  Var id;
  Var generator_loss;
  Var discriminator_loss;
  LossReport report;
};

/// Critic outputs on each fake are computed once and feed both sides. When
/// the passes carry no identity outputs the identity term is reported as 0,
/// which requires its weight at `iter` to be 0.
Objective full_objective(Graph& graph, const CycleNets& nets, const LossWeights& weights, Var x, Var y,
                         const GeneratorPasses& passes, std::size_t iter);
Objective full_objective(Graph& graph, const CycleNets& nets, const LossWeights& weights, Var x, Var y,
                         std::size_t iter);

}  // namespace postfilter::objectives
