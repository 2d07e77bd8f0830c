#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "mgrpo/rng.hpp"

namespace mgrpo {

/// Autoregressive categorical policy over a small vocabulary.
///
/// Per-prompt logits are indexed [prompt][position][previous token][token].
/// The previous token slot `vocab_size()` is the BOS context and is the only
/// context read at position 0. Storage is row-major in that index order.
///
/// An optional shared row of V logits is added to every prompt's first-token
/// logits (position 0, BOS context), so learning there carries across prompts.
/// It is stored after the per-prompt block; `data()` covers both and
/// optimizers/EMA treat them uniformly.
class TabularPolicy {
 public:
  TabularPolicy() = default;
  /// All-zero (uniform) policy. Throws std::invalid_argument on a bad shape.
  TabularPolicy(int num_prompts, int seq_len, int vocab_size, bool shared = false);

  int num_prompts() const { return num_prompts_; }
  int seq_len() const { return seq_len_; }
  int vocab_size() const { return vocab_size_; }
  int bos() const { return vocab_size_; }
  bool has_shared() const { return shared_; }
  std::size_t size() const { return logits_.size(); }

  /// Per-prompt logits of state (prompt, t, prev). Throws std::out_of_range.
  std::span<double> row(int prompt, int t, int prev);
  std::span<const double> row(int prompt, int t, int prev) const;

  /// Shared first-token logits. Throws std::logic_error without a shared row.
  std::span<double> shared_row();
  std::span<const double> shared_row() const;

  /// Effective logits of state (prompt, t, prev): per-prompt plus shared.
  std::vector<double> logits(int prompt, int t, int prev) const;

  /// Flat offset of the first logit of state (prompt, t, prev).
  std::size_t offset(int prompt, int t, int prev) const;

  std::span<double> data() { return logits_; }
  std::span<const double> data() const { return logits_; }

  bool same_shape(const TabularPolicy& other) const;
  bool all_finite() const;

  friend bool operator==(const TabularPolicy&, const TabularPolicy&) = default;

 private:
  int num_prompts_ = 0;
  int seq_len_ = 0;
  int vocab_size_ = 0;
  bool shared_ = false;
  std::vector<double> logits_;
};

enum class Origin { Current, Momentum };

std::string_view to_string(Origin origin);

/// One sampled rollout.
struct Trajectory {
  int prompt_id = 0;
  std::vector<int> tokens;
  int answer = 0;
  std::vector<double> step_logprobs;
  /// Mean per-step entropy (nats) of the tempered distributions visited.
  double entropy = 0.0;
  Origin origin = Origin::Current;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// How per-step entropies along a path are combined into one number.
enum class EntropyAggregation { MeanPerStep, SumPerStep };

/// softmax(logits / temperature), computed with max-subtraction.
std::vector<double> tempered_softmax(std::span<const double> logits, double temperature);

/// log softmax(logits / temperature).
std::vector<double> tempered_log_softmax(std::span<const double> logits,
                                         double temperature);

/// Shannon entropy (nats) of softmax(logits / temperature).
double tempered_entropy(std::span<const double> logits, double temperature);

Trajectory sample_trajectory(const TabularPolicy& policy, int prompt_id,
                             double temperature, Engine& rng,
                             Origin origin = Origin::Current);

double trajectory_logprob(const TabularPolicy& policy, const Trajectory& trajectory,
                          double temperature);

double trajectory_entropy(const TabularPolicy& policy, const Trajectory& trajectory,
                          double temperature,
                          EntropyAggregation aggregation = EntropyAggregation::MeanPerStep);

/// Returns momentum * m + current * (1 - m), elementwise.
TabularPolicy ema_update(const TabularPolicy& momentum, const TabularPolicy& current,
                         double m);
void ema_update_in_place(TabularPolicy& momentum, const TabularPolicy& current, double m);

/// Mean over visited states of KL(policy || reference) between tempered categoricals.
double kl_to_reference(const TabularPolicy& policy, const TabularPolicy& reference,
                       const Trajectory& trajectory, double temperature);

/// KL(softmax(p/T) || softmax(q/T)) for one state.
double tempered_kl(std::span<const double> p_logits, std::span<const double> q_logits,
                   double temperature);

/// Text checkpoint: header lines then one state row of V logits per line
/// (per-prompt rows, then the shared row if present), printed with 17
/// significant digits.
void write_policy_text(std::ostream& out, const TabularPolicy& policy);
TabularPolicy read_policy_text(std::istream& in);

}  // namespace mgrpo
