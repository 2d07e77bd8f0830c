#include "mgrpo/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mgrpo {

void EnvConfig::validate() const {
  if (num_prompts < 1) throw std::invalid_argument("env.num_prompts must be >= 1");
  if (vocab_size < 2) throw std::invalid_argument("env.vocab_size must be >= 2");
  if (seq_len < 1) throw std::invalid_argument("env.seq_len must be >= 1");
  if (!(deceptive_fraction >= 0.0 && deceptive_fraction <= 1.0)) {
    throw std::invalid_argument("env.deceptive_fraction must lie in [0, 1]");
  }
  if (!std::isfinite(bias_magnitude) || !std::isfinite(truth_bias)) {
    throw std::invalid_argument("env biases must be finite");
  }
  if (!(init_std >= 0.0)) throw std::invalid_argument("env.init_std must be >= 0");
  if (!std::isfinite(shortcut_entry) || !std::isfinite(shortcut_chain) ||
      !std::isfinite(shortcut_confidence)) {
    throw std::invalid_argument("env shortcut parameters must be finite");
  }
}

int TaskSet::deceptive_count() const {
  return static_cast<int>(
      std::count_if(planted_answers.begin(), planted_answers.end(),
                     [](int a) { return a >= 0; }));
}

std::pair<TaskSet, TabularPolicy> generate_tasks(const EnvConfig& config,
                                                 std::uint64_t seed) {
  config.validate();
  const int n = config.num_prompts;
  const int vocab = config.vocab_size;

  TaskSet tasks;
  tasks.num_prompts = n;
  tasks.vocab_size = vocab;
  tasks.seq_len = config.seq_len;
  tasks.deceptive_fraction = config.deceptive_fraction;
  tasks.bias_magnitude = config.bias_magnitude;
  tasks.truth_bias = config.truth_bias;
  tasks.seed = seed;
  tasks.true_answers.resize(n);
  tasks.planted_answers.assign(n, -1);

  Engine env_rng = make_stream(seed, Stream::Env);
  std::uniform_int_distribution<int> answer_dist(0, vocab - 1);
  for (int& a : tasks.true_answers) a = answer_dist(env_rng);

  const int deceptive =
      static_cast<int>(std::lround(config.deceptive_fraction * static_cast<double>(n)));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), env_rng);
  std::uniform_int_distribution<int> wrong_dist(0, vocab - 2);
  for (int i = 0; i < deceptive; ++i) {
    const int prompt = order[i];
    int wrong = wrong_dist(env_rng);
    if (wrong >= tasks.true_answers[prompt]) ++wrong;
    tasks.planted_answers[prompt] = wrong;
  }

  if (config.shortcut) tasks.shortcut_token = answer_dist(env_rng);

  TabularPolicy policy(n, config.seq_len, vocab, config.shortcut);
  Engine init_rng = make_stream(seed, Stream::Init);
  std::normal_distribution<double> noise(0.0, 1.0);
  // The shared row starts at zero apart from the planted entry bonus.
  auto per_prompt = policy.data().first(policy.size() - (config.shortcut ? vocab : 0));
  for (double& x : per_prompt) x = config.init_std * noise(init_rng);

  const int last = config.seq_len - 1;
  const int first_context = last == 0 ? policy.bos() : 0;
  const int last_context = last == 0 ? policy.bos() : vocab - 1;
  for (int p = 0; p < n; ++p) {
    for (int prev = first_context; prev <= last_context; ++prev) {
      auto row = policy.row(p, last, prev);
      row[tasks.true_answers[p]] += config.truth_bias;
      if (tasks.planted_answers[p] >= 0) row[tasks.planted_answers[p]] += config.bias_magnitude;
    }
  }
  if (config.shortcut) {
    const int s = tasks.shortcut_token;
    policy.shared_row()[s] += config.shortcut_entry;
    const int context = last == 0 ? policy.bos() : s;
    for (int p = 0; p < n; ++p) {
      for (int t = 1; t < last; ++t) policy.row(p, t, s)[s] += config.shortcut_chain;
      const int target =
          tasks.planted_answers[p] >= 0 ? tasks.planted_answers[p] : tasks.true_answers[p];
      policy.row(p, last, context)[target] += config.shortcut_confidence;
    }
  }
  return {std::move(tasks), std::move(policy)};
}

EvalResult evaluate_accuracy(const TabularPolicy& policy, const TaskSet& tasks,
                             double eval_temperature, int samples_per_prompt,
                             std::uint64_t seed, std::uint64_t eval_key) {
  if (samples_per_prompt < 1) {
    throw std::invalid_argument("evaluate_accuracy: samples_per_prompt must be >= 1");
  }
  if (policy.num_prompts() != tasks.num_prompts ||
      policy.vocab_size() != tasks.vocab_size || policy.seq_len() != tasks.seq_len) {
    throw std::invalid_argument("evaluate_accuracy: policy does not match task set");
  }
  long correct = 0;
  double entropy_sum = 0.0;
  for (int p = 0; p < tasks.num_prompts; ++p) {
    Engine rng = make_stream(seed, Stream::Eval, eval_key, static_cast<std::uint64_t>(p));
    for (int s = 0; s < samples_per_prompt; ++s) {
      Trajectory traj = sample_trajectory(policy, p, eval_temperature, rng);
      if (traj.answer == tasks.true_answers[p]) ++correct;
      entropy_sum += traj.entropy;
    }
  }
  const double total = static_cast<double>(tasks.num_prompts) * samples_per_prompt;
  return {static_cast<double>(correct) / total, entropy_sum / total};
}

void to_json(nlohmann::json& j, const TaskSet& tasks) {
  j = nlohmann::json{{"num_prompts", tasks.num_prompts},
                     {"vocab_size", tasks.vocab_size},
                     {"seq_len", tasks.seq_len},
                     {"seed", tasks.seed},
                     {"deceptive_fraction", tasks.deceptive_fraction},
                     {"bias_magnitude", tasks.bias_magnitude},
                     {"truth_bias", tasks.truth_bias},
                     {"shortcut_token", tasks.shortcut_token},
                     {"true_answers", tasks.true_answers},
                     {"planted_answers", tasks.planted_answers}};
}

void from_json(const nlohmann::json& j, TaskSet& tasks) {
  j.at("num_prompts").get_to(tasks.num_prompts);
  j.at("vocab_size").get_to(tasks.vocab_size);
  j.at("seq_len").get_to(tasks.seq_len);
  j.at("seed").get_to(tasks.seed);
  j.at("deceptive_fraction").get_to(tasks.deceptive_fraction);
  j.at("bias_magnitude").get_to(tasks.bias_magnitude);
  j.at("truth_bias").get_to(tasks.truth_bias);
  j.at("shortcut_token").get_to(tasks.shortcut_token);
  j.at("true_answers").get_to(tasks.true_answers);
  j.at("planted_answers").get_to(tasks.planted_answers);
}

}  // namespace mgrpo
