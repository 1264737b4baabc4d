#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "postfilter/io/files.hpp"
#include "postfilter/models/discriminator.hpp"
#include "postfilter/models/generator.hpp"
#include "postfilter/objectives/losses.hpp"
#include "postfilter/trainer/config.hpp"
#include "postfilter/trainer/corpus.hpp"

namespace postfilter::trainer {

/// lr0 while iter < warm_iters, then linear decay reaching 0 at total_iters.
double lr_schedule(std::size_t iter, std::size_t warm_iters, std::size_t total_iters, double lr0);

struct Batch {
  ad::SignalTensor x;  // [B x 1 x L]
  ad::SignalTensor y;
  std::vector<std::string> x_ids;
  std::vector<std::string> y_ids;
  std::vector<std::size_t> x_offsets;
  std::vector<std::size_t> y_offsets;
};

/// Segments at uniform offsets, drawn from a generator seeded by (seed, iter).
/// Paired mode uses the same utterance id and offset on both sides.
Batch sample_batch(const Corpus& x, const Corpus& y, const TrainConfig& config, std::size_t iter);

/// Adam moments for one parameter list.
class Adam {
 public:
  explicit Adam(models::ParameterList& params);

  /// Applies one update from the gradients currently stored in the parameters.
  void step(double lr, double beta1, double beta2, double eps);

  std::size_t steps() const noexcept { return steps_; }
  void set_steps(std::size_t steps) noexcept { steps_ = steps; }
  std::vector<ad::SignalTensor>& first_moments() noexcept { return m_; }
  std::vector<ad::SignalTensor>& second_moments() noexcept { return v_; }

 private:
  models::ParameterList* params_;
  std::vector<ad::SignalTensor> m_;
  std::vector<ad::SignalTensor> v_;
  std::size_t steps_ = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Both generators, the critics of each side and their optimiser state.
class TrainState {
 public:
  explicit TrainState(TrainConfig config);

  const TrainConfig& config() const noexcept { return config_; }
  std::size_t iter() const noexcept { return iter_; }
  void set_iter(std::size_t iter) noexcept { iter_ = iter; }

  models::GeneratorNet& g_xy() { return *g_xy_; }
  models::GeneratorNet& g_yx() { return *g_yx_; }
  /// Critics of the Y side (judging G_xy(x)) and of the X side; wave first.
  std::vector<std::unique_ptr<models::DiscriminatorNet>>& d_y() { return d_y_; }
  std::vector<std::unique_ptr<models::DiscriminatorNet>>& d_x() { return d_x_; }
  Adam& adam_g_xy() { return *adam_g_xy_; }
  Adam& adam_g_yx() { return *adam_g_yx_; }
  std::vector<std::unique_ptr<Adam>>& adam_d() { return adam_d_; }

  std::vector<objectives::LossReport>& history() { return history_; }
  const std::vector<objectives::LossReport>& history() const { return history_; }

  /// Every parameter and optimiser tensor under a stable qualified name.
  std::vector<std::pair<std::string, ad::SignalTensor*>> named_tensors();

  /// Critic callables bound frozen (generator phase) or trainable.
  objectives::CycleNets cycle_nets(models::Binding critic_binding);

 private:
  TrainConfig config_;
  std::size_t iter_ = 0;
  std::unique_ptr<models::GeneratorNet> g_xy_;
  std::unique_ptr<models::GeneratorNet> g_yx_;
  std::vector<std::unique_ptr<models::DiscriminatorNet>> d_y_;
  std::vector<std::unique_ptr<models::DiscriminatorNet>> d_x_;
  std::unique_ptr<Adam> adam_g_xy_;
  std::unique_ptr<Adam> adam_g_yx_;
  std::vector<std::unique_ptr<Adam>> adam_d_;
  std::vector<objectives::LossReport> history_;
};

struct StepResult {
  objectives::LossReport report;
  double lr = 0.0;
  /// Discriminator-phase objective before its update.
  double discriminator_loss = 0.0;
};

/// One discriminator update on every critic, then one generator update on
/// the full objective with the updated critics frozen.
StepResult train_step(TrainState& state, const Batch& batch);

/// Discriminator phase only, used by the optimisation sanity checks.
double discriminator_step(TrainState& state, const Batch& batch, double lr);

/// Runs until `state.iter() == until`, calling `on_step` after each step.
template <typename OnStep>
void train(TrainState& state, const Corpus& x, const Corpus& y, std::size_t until, OnStep on_step) {
  while (state.iter() < until) {
    const Batch batch = sample_batch(x, y, state.config(), state.iter());
    const StepResult r = train_step(state, batch);
    on_step(r);
  }
}

enum class CheckpointErrorKind { corrupt_manifest, shape_mismatch, version_mismatch, io };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  CheckpointErrorKind kind() const noexcept { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

enum class StorageType { f64, f32 };

inline constexpr int kCheckpointVersion = 1;

/// manifest.json plus one little-endian .bin per tensor. f32 storage rounds
/// parameters and so does not resume bit-exactly.
void save_checkpoint(TrainState& state, const std::filesystem::path& dir, StorageType storage = StorageType::f64);
std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& dir);

/// Loss history as CSV rows: iter, lr, adv_d, adv_g, cyc, id, full, then
/// per-domain discriminator values.
io::CsvTable loss_table(const TrainState& state);

}  // namespace postfilter::trainer
