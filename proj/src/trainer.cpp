#include "mgrpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace mgrpo {

namespace {

[[noreturn]] void bad_config(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config field '" + field + "': " + why);
}

void check_scored_trajectory(const TabularPolicy& policy, const Trajectory& traj) {
  if (traj.prompt_id < 0 || traj.prompt_id >= policy.num_prompts() ||
      static_cast<int>(traj.tokens.size()) != policy.seq_len()) {
    throw std::invalid_argument("trajectory does not match policy shape");
  }
  for (int token : traj.tokens) {
    if (token < 0 || token >= policy.vocab_size()) {
      throw std::out_of_range("token id " + std::to_string(token) + " out of range");
    }
  }
}

// Adds scale * d log softmax(row/T)[token] / d row into grad_row.
void add_logprob_gradient(std::span<double> grad_row, std::span<const double> probs,
                          int token, double scale, double temperature) {
  for (std::size_t j = 0; j < grad_row.size(); ++j) {
    double indicator = static_cast<int>(j) == token ? 1.0 : 0.0;
    grad_row[j] += scale * (indicator - probs[j]) / temperature;
  }
}

// First-token logits are per-prompt plus shared, so their gradient lands in both.
void accumulate_state_gradient(TabularPolicy& gradient, int prompt, int t, int prev,
                               std::span<const double> grad_row) {
  auto own = gradient.row(prompt, t, prev);
  for (std::size_t j = 0; j < own.size(); ++j) own[j] += grad_row[j];
  if (gradient.has_shared() && t == 0) {
    auto common = gradient.shared_row();
    for (std::size_t j = 0; j < common.size(); ++j) common[j] += grad_row[j];
  }
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::MgrpoIqr: return "MGRPO_IQR";
    case Mode::MgrpoNoFilter: return "MGRPO_NOFILTER";
    case Mode::SrtBaseline: return "SRT_BASELINE";
  }
  return "?";
}

std::string_view to_string(Schedule schedule) {
  return schedule == Schedule::CosineWarmup ? "cosine_warmup" : "constant";
}

std::string_view to_string(EntropyAggregation aggregation) {
  return aggregation == EntropyAggregation::MeanPerStep ? "mean" : "sum";
}

Mode mode_from_string(std::string_view name) {
  if (name == "MGRPO_IQR") return Mode::MgrpoIqr;
  if (name == "MGRPO_NOFILTER") return Mode::MgrpoNoFilter;
  if (name == "SRT_BASELINE") return Mode::SrtBaseline;
  throw std::invalid_argument("unknown mode '" + std::string(name) +
                              "' (expected MGRPO_IQR, MGRPO_NOFILTER or SRT_BASELINE)");
}

Schedule schedule_from_string(std::string_view name) {
  if (name == "cosine_warmup") return Schedule::CosineWarmup;
  if (name == "constant") return Schedule::Constant;
  throw std::invalid_argument("unknown schedule '" + std::string(name) +
                              "' (expected cosine_warmup or constant)");
}

EntropyAggregation aggregation_from_string(std::string_view name) {
  if (name == "mean") return EntropyAggregation::MeanPerStep;
  if (name == "sum") return EntropyAggregation::SumPerStep;
  throw std::invalid_argument("unknown entropy aggregation '" + std::string(name) +
                              "' (expected mean or sum)");
}

int TrainConfig::current_rollouts() const {
  return total_rollouts - effective_momentum_rollouts();
}

int TrainConfig::effective_momentum_rollouts() const {
  return mode == Mode::SrtBaseline ? 0 : momentum_rollouts;
}

double TrainConfig::effective_momentum_temperature() const {
  return momentum_temperature.value_or(train_temperature);
}

void TrainConfig::validate() const {
  if (total_rollouts < 1) bad_config("total_rollouts", "must be >= 1");
  if (momentum_rollouts < 0 || momentum_rollouts >= total_rollouts) {
    bad_config("momentum_rollouts", "must satisfy 0 <= N < total_rollouts");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) bad_config("momentum", "must lie in [0, 1)");
  filter.validate();
  auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
  if (!positive(train_temperature)) bad_config("train_temperature", "must be > 0");
  if (!positive(eval_temperature)) bad_config("eval_temperature", "must be > 0");
  if (momentum_temperature && !positive(*momentum_temperature)) {
    bad_config("momentum_temperature", "must be > 0");
  }
  if (batch_size < 1) bad_config("batch_size", "must be >= 1");
  if (!(learning_rate >= 0.0)) bad_config("learning_rate", "must be >= 0");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) {
    bad_config("warmup_ratio", "must lie in [0, 1]");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) bad_config("adam_beta1", "must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) bad_config("adam_beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0.0)) bad_config("adam_eps", "must be > 0");
  if (!(weight_decay >= 0.0)) bad_config("weight_decay", "must be >= 0");
  if (!(kl_coefficient >= 0.0)) bad_config("kl_coefficient", "must be >= 0");
  if (total_steps < 0) bad_config("total_steps", "must be >= 0");
  if (eval_interval < 1) bad_config("eval_interval", "must be >= 1");
  if (eval_samples < 1) bad_config("eval_samples", "must be >= 1");
  if (threads < 1) bad_config("threads", "must be >= 1");
  if (checkpoint_interval < 0) bad_config("checkpoint_interval", "must be >= 0");
}

ObjectiveResult objective_and_gradient(const TabularPolicy& current,
                                       const TabularPolicy& reference,
                                       std::span<const RolloutGroup> groups, double beta,
                                       double temperature) {
  if (!current.same_shape(reference)) {
    throw std::invalid_argument("objective_and_gradient: policy shapes differ");
  }
  if (!(temperature > 0.0)) throw std::domain_error("temperature must be positive");
  ObjectiveResult result;
  result.gradient =
      TabularPolicy(current.num_prompts(), current.seq_len(), current.vocab_size(),
                    current.has_shared());
  if (groups.empty()) return result;

  std::size_t scored_count = 0;
  for (const auto& g : groups) scored_count += g.scored.size();
  const double batch_weight = 1.0 / static_cast<double>(groups.size());
  const double kl_weight =
      scored_count == 0 ? 0.0 : beta / static_cast<double>(scored_count);
  const double per_state = 1.0 / current.seq_len();

  double advantage_term = 0.0;
  double kl_sum = 0.0;
  for (const auto& group : groups) {
    if (group.advantages.size() != group.scored.size()) {
      throw std::invalid_argument("objective_and_gradient: advantages misaligned");
    }
    for (std::size_t i = 0; i < group.scored.size(); ++i) {
      const Trajectory& traj = group.trajectories.at(group.scored[i]);
      check_scored_trajectory(current, traj);
      const double advantage = group.degenerate ? 0.0 : group.advantages[i];
      double traj_kl = 0.0;
      int prev = current.bos();
      for (int t = 0; t < current.seq_len(); ++t) {
        auto row = current.logits(traj.prompt_id, t, prev);
        std::vector<double> grad_row(row.size(), 0.0);
        const int token = traj.tokens[t];
        auto log_p = tempered_log_softmax(row, temperature);
        std::vector<double> probs(log_p.size());
        for (std::size_t j = 0; j < probs.size(); ++j) probs[j] = std::exp(log_p[j]);

        if (advantage != 0.0) {
          advantage_term += batch_weight * advantage * log_p[token];
          add_logprob_gradient(grad_row, probs, token, batch_weight * advantage, temperature);
        }
        if (beta != 0.0) {
          auto log_q =
              tempered_log_softmax(reference.logits(traj.prompt_id, t, prev), temperature);
          double kl = 0.0;
          for (std::size_t j = 0; j < probs.size(); ++j) {
            if (probs[j] > 0.0) kl += probs[j] * (log_p[j] - log_q[j]);
          }
          // d KL / d row_j = p_j (log p_j - log q_j - KL) / T
          for (std::size_t j = 0; j < probs.size(); ++j) {
            double diff = probs[j] > 0.0 ? log_p[j] - log_q[j] : 0.0;
            grad_row[j] -= kl_weight * per_state * probs[j] * (diff - kl) / temperature;
          }
          traj_kl += kl * per_state;
        }
        accumulate_state_gradient(result.gradient, traj.prompt_id, t, prev, grad_row);
        prev = token;
      }
      kl_sum += traj_kl;
    }
  }
  result.mean_kl = scored_count == 0 ? 0.0 : kl_sum / static_cast<double>(scored_count);
  result.objective = advantage_term - beta * result.mean_kl;
  return result;
}

ObjectiveResult clipped_surrogate_and_gradient(const TabularPolicy& current,
                                               std::span<const RolloutGroup> groups,
                                               double clip_ratio, double temperature) {
  if (!(clip_ratio >= 0.0)) throw std::domain_error("clip_ratio must be >= 0");
  if (!(temperature > 0.0)) throw std::domain_error("temperature must be positive");
  ObjectiveResult result;
  result.gradient =
      TabularPolicy(current.num_prompts(), current.seq_len(), current.vocab_size(),
                    current.has_shared());
  if (groups.empty()) return result;
  const double batch_weight = 1.0 / static_cast<double>(groups.size());
  for (const auto& group : groups) {
    if (group.degenerate) continue;
    for (std::size_t i = 0; i < group.scored.size(); ++i) {
      const Trajectory& traj = group.trajectories.at(group.scored[i]);
      check_scored_trajectory(current, traj);
      const double advantage = group.advantages.at(i);
      int prev = current.bos();
      for (int t = 0; t < current.seq_len(); ++t) {
        auto row = current.logits(traj.prompt_id, t, prev);
        const int token = traj.tokens[t];
        auto log_p = tempered_log_softmax(row, temperature);
        const double ratio = std::exp(log_p[token] - traj.step_logprobs.at(t));
        const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio);
        const double unclipped_term = ratio * advantage;
        const double clipped_term = clipped * advantage;
        result.objective += batch_weight * std::min(unclipped_term, clipped_term);
        // The clipped branch is constant in the logits; only the ratio branch
        // carries gradient, and only when it is the active minimum.
        if (unclipped_term <= clipped_term) {
          std::vector<double> probs(log_p.size());
          for (std::size_t j = 0; j < probs.size(); ++j) probs[j] = std::exp(log_p[j]);
          std::vector<double> grad_row(row.size(), 0.0);
          add_logprob_gradient(grad_row, probs, token, batch_weight * advantage * ratio,
                               temperature);
          accumulate_state_gradient(result.gradient, traj.prompt_id, t, prev, grad_row);
        }
        prev = token;
      }
    }
  }
  return result;
}

double lr_at(int step, const TrainConfig& config) {
  if (config.schedule == Schedule::Constant) return config.learning_rate;
  const double total = config.total_steps;
  const double warmup = config.warmup_ratio * total;
  const double s = std::clamp(static_cast<double>(step), 0.0, total);
  if (s < warmup) return config.learning_rate * s / warmup;
  if (total <= warmup) return config.learning_rate;
  const double progress = (s - warmup) / (total - warmup);
  return config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void optimizer_step(TabularPolicy& params, const TabularPolicy& grad, OptimizerState& opt,
                    double lr, const TrainConfig& config) {
  if (!params.same_shape(grad)) throw std::invalid_argument("optimizer_step: shape mismatch");
  auto p = params.data();
  auto g = grad.data();
  if (opt.first_moment.size() != p.size() || opt.second_moment.size() != p.size()) {
    throw std::invalid_argument("optimizer_step: optimizer state shape mismatch");
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw std::runtime_error("optimizer_step: non-finite gradient at flat index " +
                               std::to_string(i) + " (value " + std::to_string(g[i]) + ")");
    }
  }
  ++opt.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    double& m = opt.first_moment[i];
    double& v = opt.second_moment[i];
    m = b1 * m + (1.0 - b1) * g[i];
    v = b2 * v + (1.0 - b2) * g[i] * g[i];
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    p[i] += lr * m_hat / (std::sqrt(v_hat) + config.adam_eps) - lr * config.weight_decay * p[i];
  }
}

TrainState TrainState::from_initial(const TabularPolicy& initial) {
  TrainState state;
  state.current = initial;
  state.momentum = initial;
  state.reference = initial;
  state.opt = OptimizerState(initial.size());
  return state;
}

RolloutGroup build_group(const TrainState& state, int prompt_id, int step,
                         const TrainConfig& config) {
  const int current_n = config.current_rollouts();
  const int momentum_n = config.effective_momentum_rollouts();
  const auto key_step = static_cast<std::uint64_t>(step);
  const auto key_prompt = static_cast<std::uint64_t>(prompt_id);

  RolloutGroup group;
  group.prompt_id = prompt_id;
  group.trajectories.reserve(current_n + momentum_n);
  Engine current_rng = make_stream(config.seed, Stream::Current, key_step, key_prompt);
  for (int i = 0; i < current_n; ++i) {
    group.trajectories.push_back(sample_trajectory(state.current, prompt_id,
                                                   config.train_temperature, current_rng,
                                                   Origin::Current));
  }
  if (momentum_n > 0) {
    Engine momentum_rng = make_stream(config.seed, Stream::Momentum, key_step, key_prompt);
    for (int j = 0; j < momentum_n; ++j) {
      group.trajectories.push_back(sample_trajectory(
          state.momentum, prompt_id, config.effective_momentum_temperature(), momentum_rng,
          Origin::Momentum));
    }
  }

  std::vector<double> entropies;
  entropies.reserve(group.trajectories.size());
  for (const auto& traj : group.trajectories) {
    if (config.entropy_aggregation == EntropyAggregation::MeanPerStep) {
      entropies.push_back(traj.entropy);
    } else {
      const TabularPolicy& source =
          traj.origin == Origin::Current ? state.current : state.momentum;
      const double temperature = traj.origin == Origin::Current
                                     ? config.train_temperature
                                     : config.effective_momentum_temperature();
      entropies.push_back(trajectory_entropy(source, traj, temperature,
                                             EntropyAggregation::SumPerStep));
    }
  }

  FilterConfig filter = config.filter;
  filter.enabled = config.filter_active();
  group.keep_mask = iqr_filter(entropies, filter).keep_mask;

  std::vector<int> kept_answers;
  for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
    if (group.keep_mask[i]) kept_answers.push_back(group.trajectories[i].answer);
  }
  if (kept_answers.empty()) {
    group.degenerate = true;
    return group;
  }
  group.pseudo_answer = majority_vote(kept_answers);

  std::vector<int> scored_answers;
  for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
    if (group.keep_mask[i] && group.trajectories[i].origin == Origin::Current) {
      group.scored.push_back(static_cast<int>(i));
      scored_answers.push_back(group.trajectories[i].answer);
    }
  }
  if (group.scored.empty()) {
    group.degenerate = true;
    return group;
  }
  group.rewards = binary_rewards(*group.pseudo_answer, scored_answers);
  Advantages adv = normalize_advantages(group.rewards);
  group.advantages = std::move(adv.values);
  group.degenerate = adv.degenerate;
  return group;
}

std::vector<int> batch_for_step(int step, int num_prompts, const TrainConfig& config) {
  if (step < 1) throw std::invalid_argument("batch_for_step: steps are numbered from 1");
  std::vector<int> batch;
  batch.reserve(config.batch_size);
  const long first = static_cast<long>(step - 1) * config.batch_size;
  long cached_epoch = -1;
  std::vector<int> order(num_prompts);
  for (long k = first; k < first + config.batch_size; ++k) {
    const long epoch = k / num_prompts;
    if (epoch != cached_epoch) {
      std::iota(order.begin(), order.end(), 0);
      Engine rng = make_stream(config.seed, Stream::Shuffle, static_cast<std::uint64_t>(epoch));
      std::shuffle(order.begin(), order.end(), rng);
      cached_epoch = epoch;
    }
    batch.push_back(order[k % num_prompts]);
  }
  return batch;
}

StepMetrics train_step(TrainState& state, std::span<const int> prompts,
                       const TrainConfig& config) {
  if (prompts.empty()) throw std::invalid_argument("train_step: empty prompt batch");
  const int step = state.step + 1;

  std::vector<RolloutGroup> groups(prompts.size());
  const int workers = std::min<int>(config.threads, static_cast<int>(prompts.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      groups[i] = build_group(state, prompts[i], step, config);
    }
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < prompts.size(); i += workers) {
              groups[i] = build_group(state, prompts[i], step, config);
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  StepMetrics metrics;
  metrics.step = step;
  metrics.learning_rate = lr_at(step, config);

  int pool_total = 0, pool_removed = 0;
  int current_total = 0, current_removed = 0;
  int momentum_total = 0, momentum_removed = 0;
  int degenerate = 0, scorable = 0;
  double reward_sum = 0.0, entropy_sum = 0.0;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      const bool removed = !g.keep_mask[i];
      ++pool_total;
      pool_removed += removed;
      if (g.trajectories[i].origin == Origin::Current) {
        ++current_total;
        current_removed += removed;
        entropy_sum += g.trajectories[i].entropy;
      } else {
        ++momentum_total;
        momentum_removed += removed;
      }
    }
    if (g.degenerate) ++degenerate;
    if (!g.rewards.empty()) {
      ++scorable;
      reward_sum += std::accumulate(g.rewards.begin(), g.rewards.end(), 0.0) /
                    static_cast<double>(g.rewards.size());
    }
  }
  const double batch = static_cast<double>(groups.size());
  metrics.batch_entropy = entropy_sum / current_total;
  metrics.filtered_fraction = static_cast<double>(pool_removed) / pool_total;
  metrics.filtered_fraction_current = static_cast<double>(current_removed) / current_total;
  metrics.filtered_fraction_momentum =
      momentum_total == 0 ? 0.0 : static_cast<double>(momentum_removed) / momentum_total;
  metrics.degenerate_group_fraction = degenerate / batch;

  if (scorable == 0) {
    metrics.skipped = true;
    state.step = step;
    return metrics;
  }
  metrics.mean_self_reward = reward_sum / scorable;

  ObjectiveResult result = objective_and_gradient(state.current, state.reference, groups,
                                                  config.kl_coefficient,
                                                  config.train_temperature);
  metrics.mean_kl = result.mean_kl;
  metrics.objective_value = result.objective;

  optimizer_step(state.current, result.gradient, state.opt, metrics.learning_rate, config);
  if (config.mode != Mode::SrtBaseline) {
    ema_update_in_place(state.momentum, state.current, config.momentum);
  }
  state.step = step;
  return metrics;
}

MetricsLog run_training(const TrainConfig& config, const TaskSet& tasks,
                        const TabularPolicy& initial, const RunHooks& hooks) {
  config.validate();
  if (initial.num_prompts() != tasks.num_prompts) {
    throw std::invalid_argument("run_training: policy does not match task set");
  }
  TrainState state = TrainState::from_initial(initial);
  MetricsLog log;
  log.reserve(static_cast<std::size_t>(config.total_steps) + 1);

  auto evaluate_into = [&](StepMetrics& row) {
    EvalResult eval =
        evaluate_accuracy(state.current, tasks, config.eval_temperature, config.eval_samples,
                          config.seed, static_cast<std::uint64_t>(state.step));
    row.true_accuracy = eval.accuracy;
    row.mean_policy_entropy = eval.mean_entropy;
  };
  auto emit = [&](StepMetrics row) {
    log.push_back(row);
    if (hooks.on_row) hooks.on_row(log.back());
  };

  StepMetrics initial_row;
  initial_row.step = 0;
  initial_row.learning_rate = lr_at(0, config);
  evaluate_into(initial_row);
  emit(initial_row);

  for (int s = 1; s <= config.total_steps; ++s) {
    StepMetrics row;
    try {
      auto prompts = batch_for_step(s, tasks.num_prompts, config);
      row = train_step(state, prompts, config);
      if (s % config.eval_interval == 0 || s == config.total_steps) evaluate_into(row);
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(s) + ": " + e.what());
    }
    emit(row);
    if (hooks.on_checkpoint && config.checkpoint_interval > 0 &&
        s % config.checkpoint_interval == 0 && s != config.total_steps) {
      hooks.on_checkpoint(state);
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(state);
  return log;
}

}  // namespace mgrpo
