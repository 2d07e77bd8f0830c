#include "mgrpo/entropy_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mgrpo {

void FilterConfig::validate() const {
  if (!(k >= 0.0) || !std::isfinite(k)) throw std::invalid_argument("filter.k must be >= 0");
  if (min_pool_for_filter < 2) {
    throw std::invalid_argument("filter.min_pool_for_filter must be >= 2");
  }
}

double sorted_quantile(std::span<const double> sorted, double q) {
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lower = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lower);
  if (lower + 1 >= sorted.size()) return sorted.back();
  return sorted[lower] + frac * (sorted[lower + 1] - sorted[lower]);
}

Quartiles quartiles(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("quartiles: need at least 2 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return {sorted_quantile(sorted, 0.25), sorted_quantile(sorted, 0.75)};
}

FilterOutcome iqr_filter(std::span<const double> entropies, const FilterConfig& config) {
  if (entropies.empty()) throw std::invalid_argument("iqr_filter: empty pool");
  for (double e : entropies) {
    if (!std::isfinite(e)) throw std::invalid_argument("iqr_filter: non-finite entropy");
  }
  FilterOutcome out;
  out.keep_mask.assign(entropies.size(), true);
  if (!config.enabled ||
      static_cast<int>(entropies.size()) < config.min_pool_for_filter) {
    out.threshold = -std::numeric_limits<double>::infinity();
    out.q1 = out.q3 = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  auto [q1, q3] = quartiles(entropies);
  out.q1 = q1;
  out.q3 = q3;
  out.threshold = q1 - config.k * (q3 - q1);
  for (std::size_t i = 0; i < entropies.size(); ++i) {
    if (entropies[i] < out.threshold) {
      out.keep_mask[i] = false;
      ++out.removed_count;
    }
  }
  return out;
}

}  // namespace mgrpo
