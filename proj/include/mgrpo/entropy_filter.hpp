#pragma once

#include <span>
#include <vector>

namespace mgrpo {

struct FilterConfig {
  double k = 0.75;
  int min_pool_for_filter = 4;
  bool enabled = true;

  /// Throws std::invalid_argument when k < 0 or min_pool_for_filter < 2.
  void validate() const;

  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

struct Quartiles {
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Linear-interpolation quantile of an ascending-sorted list at fractional
/// index (n - 1) * q.
double sorted_quantile(std::span<const double> sorted, double q);

/// First and third quartiles. Throws std::invalid_argument for fewer than 2 values.
Quartiles quartiles(std::span<const double> values);

struct FilterOutcome {
  std::vector<bool> keep_mask;
  /// -infinity when the filter is bypassed.
  double threshold = 0.0;
  /// NaN when the filter is bypassed.
  double q1 = 0.0;
  double q3 = 0.0;
  int removed_count = 0;
};

/// Drops low-entropy outliers: keeps e >= Q1 - k * (Q3 - Q1). Keeps everything
/// when disabled or when the pool is smaller than min_pool_for_filter.
/// Throws std::invalid_argument on an empty pool or a non-finite entropy.
FilterOutcome iqr_filter(std::span<const double> entropies, const FilterConfig& config);

}  // namespace mgrpo
