#include "mgrpo/selfreward.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mgrpo {

int majority_vote(std::span<const int> answers) {
  if (answers.empty()) throw std::invalid_argument("majority_vote: empty answer list");
  // Ordered map: iteration by ascending id, so strict '>' keeps the smallest id on ties.
  std::map<int, int> counts;
  for (int a : answers) ++counts[a];
  int best = counts.begin()->first;
  int best_count = 0;
  for (const auto& [answer, count] : counts) {
    if (count > best_count) {
      best = answer;
      best_count = count;
    }
  }
  return best;
}

std::vector<double> binary_rewards(int pseudo, std::span<const int> answers) {
  std::vector<double> rewards(answers.size());
  std::transform(answers.begin(), answers.end(), rewards.begin(),
                 [pseudo](int a) { return a == pseudo ? 1.0 : 0.0; });
  return rewards;
}

Advantages normalize_advantages(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("normalize_advantages: empty rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  double sd = std::sqrt(var);

  Advantages out;
  out.values.assign(rewards.size(), 0.0);
  // Summation noise on a constant real-valued list is ~1e-17 relative.
  double scale = 1.0;
  for (double r : rewards) scale = std::max(scale, std::abs(r));
  if (!(sd > 1e-12 * scale)) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) out.values[i] = (rewards[i] - mean) / sd;
  return out;
}

}  // namespace mgrpo
