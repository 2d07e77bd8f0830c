#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mgrpo/entropy_filter.hpp"
#include "mgrpo/env.hpp"
#include "mgrpo/policy.hpp"
#include "mgrpo/selfreward.hpp"

namespace mgrpo {

enum class Mode {
  /// Momentum-anchored vote with IQR entropy filtering of the pool.
  MgrpoIqr,
  /// Momentum-anchored vote, no filtering.
  MgrpoNoFilter,
  /// Plain self-training: vote over the current policy's own rollouts.
  SrtBaseline,
};

enum class Schedule { CosineWarmup, Constant };

std::string_view to_string(Mode mode);
std::string_view to_string(Schedule schedule);
std::string_view to_string(EntropyAggregation aggregation);
/// Accepts the canonical names (MGRPO_IQR, MGRPO_NOFILTER, SRT_BASELINE).
Mode mode_from_string(std::string_view name);
Schedule schedule_from_string(std::string_view name);
EntropyAggregation aggregation_from_string(std::string_view name);

struct TrainConfig {
  Mode mode = Mode::MgrpoIqr;
  /// G, the rollout pool size per prompt.
  int total_rollouts = 32;
  /// N, rollouts drawn from the momentum policy. Ignored (zero) in SrtBaseline.
  int momentum_rollouts = 8;
  double momentum = 0.99;
  FilterConfig filter;
  double train_temperature = 1.1;
  /// Sampling temperature of the momentum rollouts; unset means train_temperature.
  std::optional<double> momentum_temperature;
  double eval_temperature = 0.8;
  int batch_size = 8;
  double learning_rate = 0.05;
  double warmup_ratio = 0.1;
  Schedule schedule = Schedule::CosineWarmup;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double kl_coefficient = 0.005;
  int total_steps = 400;
  std::uint64_t seed = 0;
  int eval_interval = 10;
  int eval_samples = 8;
  EntropyAggregation entropy_aggregation = EntropyAggregation::MeanPerStep;
  /// Worker threads for rollout generation. Results do not depend on it.
  int threads = 1;
  /// Checkpoint every this many steps (0 = final checkpoint only).
  int checkpoint_interval = 0;

  /// M: current-policy rollouts per prompt.
  int current_rollouts() const;
  /// N actually drawn (0 in SrtBaseline).
  int effective_momentum_rollouts() const;
  double effective_momentum_temperature() const;
  bool filter_active() const { return mode == Mode::MgrpoIqr && filter.enabled; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step = 0;

  OptimizerState() = default;
  explicit OptimizerState(std::size_t size)
      : first_moment(size, 0.0), second_moment(size, 0.0) {}
};

struct ObjectiveResult {
  double objective = 0.0;
  /// Mean per-trajectory KL to the reference over the scored trajectories.
  double mean_kl = 0.0;
  /// Same shape as the policy; zero outside visited states.
  TabularPolicy gradient;
};

/// Advantage-weighted log-likelihood minus beta * mean KL, averaged over the
/// batch, with its exact gradient with respect to every logit of `current`.
/// Only the kept Current rollouts listed in each group's `scored` indices
/// enter; degenerate groups add nothing to the advantage term.
ObjectiveResult objective_and_gradient(const TabularPolicy& current,
                                       const TabularPolicy& reference,
                                       std::span<const RolloutGroup> groups, double beta,
                                       double temperature);

/// Token-level clipped-ratio surrogate against the behaviour log-probs stored
/// in each trajectory. With a fresh on-policy batch every ratio is 1 and the
/// gradient equals the unclipped one at beta = 0.
ObjectiveResult clipped_surrogate_and_gradient(const TabularPolicy& current,
                                               std::span<const RolloutGroup> groups,
                                               double clip_ratio, double temperature);

/// Learning rate for step index `step` in [0, total_steps].
double lr_at(int step, const TrainConfig& config);

/// One AdamW ascent step in place. Throws std::runtime_error on a non-finite
/// gradient entry.
void optimizer_step(TabularPolicy& params, const TabularPolicy& grad, OptimizerState& opt,
                    double lr, const TrainConfig& config);

struct StepMetrics {
  int step = 0;
  double learning_rate = 0.0;
  std::optional<double> mean_self_reward;
  std::optional<double> true_accuracy;
  std::optional<double> mean_policy_entropy;
  std::optional<double> batch_entropy;
  std::optional<double> filtered_fraction;
  std::optional<double> filtered_fraction_current;
  std::optional<double> filtered_fraction_momentum;
  std::optional<double> degenerate_group_fraction;
  std::optional<double> mean_kl;
  std::optional<double> objective_value;
  /// Set when no prompt in the batch had a scorable rollout.
  bool skipped = false;

  friend bool operator==(const StepMetrics&, const StepMetrics&) = default;
};

using MetricsLog = std::vector<StepMetrics>;

struct TrainState {
  TabularPolicy current;
  TabularPolicy momentum;
  TabularPolicy reference;
  OptimizerState opt;
  int step = 0;

  /// Current, momentum and reference all start at `initial`.
  static TrainState from_initial(const TabularPolicy& initial);
};

/// Builds one prompt's rollout group: sampling, entropies, filtering, vote,
/// rewards and advantages. `step` keys the random streams.
RolloutGroup build_group(const TrainState& state, int prompt_id, int step,
                         const TrainConfig& config);

/// Deterministic prompt order: one shuffled permutation per epoch.
std::vector<int> batch_for_step(int step, int num_prompts, const TrainConfig& config);

/// One iteration of the algorithm on the given prompts: rollouts, filtering,
/// vote, advantages, one optimizer step on the current policy, then the
/// momentum update. Advances state.step.
StepMetrics train_step(TrainState& state, std::span<const int> prompts,
                       const TrainConfig& config);

struct RunHooks {
  /// Called once per completed row, in order.
  std::function<void(const StepMetrics&)> on_row;
  /// Called at checkpoint steps and after the final step.
  std::function<void(const TrainState&)> on_checkpoint;
};

/// Full training run. Row 0 holds the initial evaluation; row s holds the
/// metrics of step s, with evaluation fields filled every eval_interval steps
/// and at the last step. Errors are rethrown with the step index attached.
MetricsLog run_training(const TrainConfig& config, const TaskSet& tasks,
                        const TabularPolicy& initial, const RunHooks& hooks = {});

}  // namespace mgrpo
