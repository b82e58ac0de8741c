#pragma once

#include <cstddef>
#include <span>
#include <utility>

namespace mer {

struct WilcoxonResult {
  double statistic = 0.0;  // W = min(W+, W-)
  double p_value = 1.0;    // two-sided
  std::size_t n_used = 0;  // pairs with a nonzero difference
  bool exact = false;      // exact null distribution vs normal approximation
};

/// Largest n for which the exact null distribution is used (ties force
/// the normal approximation regardless).
inline constexpr std::size_t kWilcoxonExactMaxN = 50;

/// Two-sided Wilcoxon signed-rank test on paired (a, b) scores.
///
/// Zero differences are dropped and |d| ties get average ranks. Without ties
/// and with n <= kWilcoxonExactMaxN the p-value comes from the exact null
/// distribution of W+; otherwise from the normal approximation with tie and
/// continuity corrections. All-zero input gives W = 0, p = 1.
/// Throws std::invalid_argument on empty input.
WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> paired);

}  // namespace mer
