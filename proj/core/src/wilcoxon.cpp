#include "mer/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mer {

namespace {

// P(T <= w) where T is the signed-rank statistic of n untied ranks 1..n.
double exact_cdf(std::size_t n, double w) {
  const std::size_t max_sum = n * (n + 1) / 2;
  std::vector<double> ways(max_sum + 1, 0.0);
  ways[0] = 1.0;
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t s = max_sum; s >= r; --s) ways[s] += ways[s - r];
  }
  const auto limit = static_cast<std::size_t>(std::floor(w + 1e-9));
  double hits = 0.0;
  for (std::size_t s = 0; s <= std::min(limit, max_sum); ++s) hits += ways[s];
  return hits / std::ldexp(1.0, static_cast<int>(n));
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> paired) {
  if (paired.empty()) throw std::invalid_argument("wilcoxon_signed_rank: no pairs");

  std::vector<double> diffs;
  diffs.reserve(paired.size());
  for (const auto& [a, b] : paired) {
    const double d = a - b;
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult result;
  result.n_used = diffs.size();
  if (diffs.empty()) {
    result.exact = true;
    return result;
  }

  const auto n = diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return std::abs(diffs[i]) < std::abs(diffs[j]); });

  std::vector<double> ranks(n);
  double tie_term = 0.0;  // sum of (t^3 - t) over tie groups
  bool has_ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    const auto t = static_cast<double>(j - i);
    if (j - i > 1) has_ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  double w_plus = 0.0;
  double w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i) (diffs[i] > 0 ? w_plus : w_minus) += ranks[i];
  result.statistic = std::min(w_plus, w_minus);

  const auto nd = static_cast<double>(n);
  if (!has_ties && n <= kWilcoxonExactMaxN) {
    result.exact = true;
    result.p_value = std::min(1.0, 2.0 * exact_cdf(n, result.statistic));
    return result;
  }

  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  const double z = std::max(0.0, std::abs(result.statistic - mean) - 0.5) / std::sqrt(var);
  result.p_value = std::min(1.0, 2.0 * normal_sf(z));
  return result;
}

}  // namespace mer
