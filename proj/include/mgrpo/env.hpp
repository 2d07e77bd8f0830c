#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mgrpo/policy.hpp"

namespace mgrpo {

/// Parameters of the synthetic task generator.
struct EnvConfig {
  int num_prompts = 200;
  int vocab_size = 8;
  int seq_len = 4;
  /// Fraction of prompts whose initial policy is biased toward a planted wrong answer.
  double deceptive_fraction = 0.3;
  /// Logit bonus of the planted wrong answer at the final position.
  double bias_magnitude = 1.5;
  /// Logit bonus of the true answer at the final position, on every prompt.
  double truth_bias = 0.0;
  /// Standard deviation of the i.i.d. Gaussian logit initialization.
  double init_std = 0.1;
  /// Plant a prompt-independent "shortcut" template in a shared logit table:
  /// an entry token at position 0 that then repeats itself, ending in a
  /// confident answer (the true one on honest prompts, the planted one on
  /// deceptive prompts).
  bool shortcut = false;
  double shortcut_entry = 0.0;
  double shortcut_chain = 0.0;
  double shortcut_confidence = 0.0;

  void validate() const;
  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

/// Prompt set with hidden ground truth. Only evaluation reads `true_answers`.
struct TaskSet {
  int num_prompts = 0;
  int vocab_size = 0;
  int seq_len = 0;
  std::vector<int> true_answers;
  /// Planted wrong answer per prompt, or -1 for an honest prompt.
  std::vector<int> planted_answers;
  double deceptive_fraction = 0.0;
  double bias_magnitude = 0.0;
  double truth_bias = 0.0;
  /// Shortcut token, or -1 when no shortcut is planted.
  int shortcut_token = -1;
  std::uint64_t seed = 0;

  int deceptive_count() const;
  friend bool operator==(const TaskSet&, const TaskSet&) = default;
};

/// Samples true answers and planted biases and returns the matching initial
/// policy. Exactly round(deceptive_fraction * num_prompts) prompts are deceptive.
std::pair<TaskSet, TabularPolicy> generate_tasks(const EnvConfig& config,
                                                 std::uint64_t seed);

struct EvalResult {
  double accuracy = 0.0;
  /// Mean trajectory entropy of the evaluation samples (at the eval temperature).
  double mean_entropy = 0.0;
};

/// Sampling-based accuracy on the task set. Draws come from the evaluation
/// stream keyed by (seed, eval_key, prompt), never from training streams.
EvalResult evaluate_accuracy(const TabularPolicy& policy, const TaskSet& tasks,
                             double eval_temperature, int samples_per_prompt,
                             std::uint64_t seed, std::uint64_t eval_key = 0);

void to_json(nlohmann::json& j, const TaskSet& tasks);
void from_json(const nlohmann::json& j, TaskSet& tasks);

}  // namespace mgrpo
