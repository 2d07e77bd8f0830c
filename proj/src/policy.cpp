#include "mgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mgrpo {

namespace {

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::domain_error("temperature must be positive and finite, got " +
                            std::to_string(temperature));
  }
}

void check_trajectory(const TabularPolicy& policy, const Trajectory& trajectory) {
  if (trajectory.prompt_id < 0 || trajectory.prompt_id >= policy.num_prompts()) {
    throw std::out_of_range("trajectory prompt_id " +
                            std::to_string(trajectory.prompt_id) + " out of range");
  }
  if (static_cast<int>(trajectory.tokens.size()) != policy.seq_len()) {
    throw std::out_of_range("trajectory length does not match policy seq_len");
  }
  for (int token : trajectory.tokens) {
    if (token < 0 || token >= policy.vocab_size()) {
      throw std::out_of_range("token id " + std::to_string(token) + " out of range");
    }
  }
}

double log_sum_exp_scaled(std::span<const double> logits, double temperature) {
  double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp((l - max_logit) / temperature);
  return max_logit / temperature + std::log(sum);
}

}  // namespace

TabularPolicy::TabularPolicy(int num_prompts, int seq_len, int vocab_size, bool shared)
    : num_prompts_(num_prompts), seq_len_(seq_len), vocab_size_(vocab_size), shared_(shared) {
  if (num_prompts < 1 || seq_len < 1 || vocab_size < 2) {
    throw std::invalid_argument("policy shape requires num_prompts >= 1, seq_len >= 1, "
                                "vocab_size >= 2");
  }
  logits_.assign(static_cast<std::size_t>(num_prompts) * seq_len * (vocab_size + 1) *
                         vocab_size +
                     (shared ? vocab_size : 0),
                 0.0);
}

std::size_t TabularPolicy::offset(int prompt, int t, int prev) const {
  if (prompt < 0 || prompt >= num_prompts_ || t < 0 || t >= seq_len_ || prev < 0 ||
      prev > vocab_size_) {
    throw std::out_of_range("policy state (" + std::to_string(prompt) + ", " +
                            std::to_string(t) + ", " + std::to_string(prev) +
                            ") out of range");
  }
  std::size_t contexts = static_cast<std::size_t>(vocab_size_) + 1;
  return ((static_cast<std::size_t>(prompt) * seq_len_ + t) * contexts + prev) *
         vocab_size_;
}

std::span<double> TabularPolicy::row(int prompt, int t, int prev) {
  return {logits_.data() + offset(prompt, t, prev), static_cast<std::size_t>(vocab_size_)};
}

std::span<const double> TabularPolicy::row(int prompt, int t, int prev) const {
  return {logits_.data() + offset(prompt, t, prev), static_cast<std::size_t>(vocab_size_)};
}

std::span<double> TabularPolicy::shared_row() {
  if (!shared_) throw std::logic_error("policy has no shared row");
  return {logits_.data() + logits_.size() - vocab_size_, static_cast<std::size_t>(vocab_size_)};
}

std::span<const double> TabularPolicy::shared_row() const {
  if (!shared_) throw std::logic_error("policy has no shared row");
  return {logits_.data() + logits_.size() - vocab_size_, static_cast<std::size_t>(vocab_size_)};
}

std::vector<double> TabularPolicy::logits(int prompt, int t, int prev) const {
  auto own = row(prompt, t, prev);
  std::vector<double> out(own.begin(), own.end());
  if (shared_ && t == 0) {
    auto common = shared_row();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += common[i];
  }
  return out;
}

bool TabularPolicy::same_shape(const TabularPolicy& other) const {
  return num_prompts_ == other.num_prompts_ && seq_len_ == other.seq_len_ &&
         vocab_size_ == other.vocab_size_ && shared_ == other.shared_;
}

bool TabularPolicy::all_finite() const {
  return std::all_of(logits_.begin(), logits_.end(),
                     [](double x) { return std::isfinite(x); });
}

std::string_view to_string(Origin origin) {
  return origin == Origin::Current ? "current" : "momentum";
}

std::vector<double> tempered_softmax(std::span<const double> logits, double temperature) {
  check_temperature(temperature);
  double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp((logits[i] - max_logit) / temperature);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

std::vector<double> tempered_log_softmax(std::span<const double> logits,
                                         double temperature) {
  check_temperature(temperature);
  double lse = log_sum_exp_scaled(logits, temperature);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] / temperature - lse;
  return out;
}

double tempered_entropy(std::span<const double> logits, double temperature) {
  auto log_probs = tempered_log_softmax(logits, temperature);
  double h = 0.0;
  for (double lp : log_probs) {
    double p = std::exp(lp);
    if (p > 0.0) h -= p * lp;
  }
  return std::max(h, 0.0);
}

Trajectory sample_trajectory(const TabularPolicy& policy, int prompt_id,
                             double temperature, Engine& rng, Origin origin) {
  check_temperature(temperature);
  if (prompt_id < 0 || prompt_id >= policy.num_prompts()) {
    throw std::out_of_range("prompt_id " + std::to_string(prompt_id) + " out of range");
  }
  const int len = policy.seq_len();
  Trajectory traj;
  traj.prompt_id = prompt_id;
  traj.origin = origin;
  traj.tokens.reserve(len);
  traj.step_logprobs.reserve(len);
  double entropy_sum = 0.0;
  int prev = policy.bos();
  for (int t = 0; t < len; ++t) {
    auto log_probs = tempered_log_softmax(policy.logits(prompt_id, t, prev), temperature);
    double u = uniform01(rng);
    double cumulative = 0.0;
    int token = static_cast<int>(log_probs.size()) - 1;
    for (std::size_t i = 0; i < log_probs.size(); ++i) {
      cumulative += std::exp(log_probs[i]);
      if (u < cumulative) {
        token = static_cast<int>(i);
        break;
      }
    }
    // Rounding can leave the cumulative sum short of 1; never land on a
    // zero-probability token.
    while (token > 0 && std::exp(log_probs[token]) == 0.0) --token;
    double h = 0.0;
    for (double lp : log_probs) {
      double p = std::exp(lp);
      if (p > 0.0) h -= p * lp;
    }
    entropy_sum += std::max(h, 0.0);
    traj.tokens.push_back(token);
    traj.step_logprobs.push_back(std::min(log_probs[token], 0.0));
    prev = token;
  }
  traj.answer = traj.tokens.back();
  traj.entropy = entropy_sum / len;
  return traj;
}

double trajectory_logprob(const TabularPolicy& policy, const Trajectory& trajectory,
                          double temperature) {
  check_temperature(temperature);
  check_trajectory(policy, trajectory);
  double total = 0.0;
  int prev = policy.bos();
  for (int t = 0; t < policy.seq_len(); ++t) {
    auto row = policy.logits(trajectory.prompt_id, t, prev);
    int token = trajectory.tokens[t];
    total += std::min(row[token] / temperature - log_sum_exp_scaled(row, temperature), 0.0);
    prev = token;
  }
  return total;
}

double trajectory_entropy(const TabularPolicy& policy, const Trajectory& trajectory,
                          double temperature, EntropyAggregation aggregation) {
  check_temperature(temperature);
  check_trajectory(policy, trajectory);
  double total = 0.0;
  int prev = policy.bos();
  for (int t = 0; t < policy.seq_len(); ++t) {
    total += tempered_entropy(policy.logits(trajectory.prompt_id, t, prev), temperature);
    prev = trajectory.tokens[t];
  }
  return aggregation == EntropyAggregation::MeanPerStep ? total / policy.seq_len() : total;
}

TabularPolicy ema_update(const TabularPolicy& momentum, const TabularPolicy& current,
                         double m) {
  TabularPolicy out = momentum;
  ema_update_in_place(out, current, m);
  return out;
}

void ema_update_in_place(TabularPolicy& momentum, const TabularPolicy& current, double m) {
  if (!(m >= 0.0 && m < 1.0)) {
    throw std::domain_error("momentum coefficient must lie in [0, 1), got " +
                            std::to_string(m));
  }
  if (!momentum.same_shape(current)) {
    throw std::invalid_argument("ema_update: policy shapes differ");
  }
  auto dst = momentum.data();
  auto src = current.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = m * dst[i] + (1.0 - m) * src[i];
}

double tempered_kl(std::span<const double> p_logits, std::span<const double> q_logits,
                   double temperature) {
  auto log_p = tempered_log_softmax(p_logits, temperature);
  auto log_q = tempered_log_softmax(q_logits, temperature);
  double kl = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    double p = std::exp(log_p[i]);
    if (p > 0.0) kl += p * (log_p[i] - log_q[i]);
  }
  return std::max(kl, 0.0);
}

double kl_to_reference(const TabularPolicy& policy, const TabularPolicy& reference,
                       const Trajectory& trajectory, double temperature) {
  if (!policy.same_shape(reference)) {
    throw std::invalid_argument("kl_to_reference: policy shapes differ");
  }
  check_temperature(temperature);
  check_trajectory(policy, trajectory);
  double total = 0.0;
  int prev = policy.bos();
  for (int t = 0; t < policy.seq_len(); ++t) {
    total += tempered_kl(policy.logits(trajectory.prompt_id, t, prev),
                         reference.logits(trajectory.prompt_id, t, prev), temperature);
    prev = trajectory.tokens[t];
  }
  return total / policy.seq_len();
}

void write_policy_text(std::ostream& out, const TabularPolicy& policy) {
  out << "mgrpo-policy v1\n";
  out << "num_prompts " << policy.num_prompts() << "\n";
  out << "seq_len " << policy.seq_len() << "\n";
  out << "vocab_size " << policy.vocab_size() << "\n";
  out << "shared " << (policy.has_shared() ? 1 : 0) << "\n";
  auto data = policy.data();
  const std::size_t width = static_cast<std::size_t>(policy.vocab_size());
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", data[i]);
    out << buf << ((i + 1) % width == 0 ? '\n' : ' ');
  }
}

TabularPolicy read_policy_text(std::istream& in) {
  std::string magic, version;
  in >> magic >> version;
  if (magic != "mgrpo-policy" || version != "v1") {
    throw std::runtime_error("not an mgrpo-policy v1 checkpoint");
  }
  auto read_field = [&in](const char* name) {
    std::string key;
    long value = 0;
    if (!(in >> key >> value) || key != name) {
      throw std::runtime_error(std::string("checkpoint header: expected ") + name);
    }
    return static_cast<int>(value);
  };
  int prompts = read_field("num_prompts");
  int len = read_field("seq_len");
  int vocab = read_field("vocab_size");
  int shared = read_field("shared");
  if (shared != 0 && shared != 1) throw std::runtime_error("checkpoint header: bad shared flag");
  TabularPolicy policy(prompts, len, vocab, shared == 1);
  for (double& x : policy.data()) {
    std::string token;
    if (!(in >> token)) throw std::runtime_error("checkpoint truncated");
    std::size_t used = 0;
    x = std::stod(token, &used);
    if (used != token.size()) throw std::runtime_error("bad logit '" + token + "'");
  }
  std::string extra;
  if (in >> extra) throw std::runtime_error("trailing data in checkpoint");
  return policy;
}

}  // namespace mgrpo
