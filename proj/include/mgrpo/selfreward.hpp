#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mgrpo/policy.hpp"

namespace mgrpo {

/// Per-prompt rollout pool and everything derived from it during one step.
struct RolloutGroup {
  int prompt_id = 0;
  /// Current-origin rollouts first, then momentum-origin rollouts.
  std::vector<Trajectory> trajectories;
  std::vector<bool> keep_mask;
  std::optional<int> pseudo_answer;
  /// Indices into `trajectories` of the kept Current rollouts; rewards and
  /// advantages are aligned to this list.
  std::vector<int> scored;
  std::vector<double> rewards;
  std::vector<double> advantages;
  bool degenerate = false;
};

/// Most frequent answer; ties go to the smallest token id.
/// Throws std::invalid_argument on an empty list.
int majority_vote(std::span<const int> answers);

/// 1 where the answer matches the pseudo-label, else 0.
std::vector<double> binary_rewards(int pseudo, std::span<const int> answers);

struct Advantages {
  std::vector<double> values;
  /// Zero reward variance: all values are 0 and the group carries no gradient.
  bool degenerate = false;
};

/// (r - mean) / population std. Throws std::invalid_argument on empty input.
Advantages normalize_advantages(std::span<const double> rewards);

}  // namespace mgrpo
