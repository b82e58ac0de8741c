#include <stdexcept>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mer/wilcoxon.hpp"

using namespace mer;

namespace {

std::vector<std::pair<double, double>> from_differences(const std::vector<double>& d) {
  std::vector<std::pair<double, double>> out;
  for (double x : d) out.emplace_back(x, 0.0);
  return out;
}

}  // namespace

TEST_CASE("exact statistic and p for [1,-2,3,-4,5]") {
  const auto pairs = from_differences({1, -2, 3, -4, 5});
  const auto r = wilcoxon_signed_rank(pairs);
  CHECK(r.statistic == 6.0);
  CHECK(r.exact);
  CHECK(r.n_used == 5);
  // 13 of the 32 sign assignments have W+ <= 6, and the distribution is symmetric.
  CHECK(r.p_value == doctest::Approx(26.0 / 32.0).epsilon(1e-12));
}

TEST_CASE("identical runs give p = 1") {
  const std::vector<std::pair<double, double>> same{{0.5, 0.5}, {0.8, 0.8}, {0.1, 0.1}};
  const auto r = wilcoxon_signed_rank(same);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK(r.n_used == 0);
}

TEST_CASE("empty input is an error") {
  CHECK_THROWS_AS(wilcoxon_signed_rank({}), std::invalid_argument);
}

TEST_CASE("zero differences are dropped") {
  const auto with_zero = wilcoxon_signed_rank(from_differences({1, -2, 0, 3, -4, 5, 0}));
  const auto without = wilcoxon_signed_rank(from_differences({1, -2, 3, -4, 5}));
  CHECK(with_zero.statistic == without.statistic);
  CHECK(with_zero.p_value == without.p_value);
  CHECK(with_zero.n_used == 5);
}

TEST_CASE("all one sign: smallest exact p") {
  const auto r = wilcoxon_signed_rank(from_differences({1, 2, 3, 4, 5, 6}));
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == doctest::Approx(2.0 / 64.0).epsilon(1e-12));
}

TEST_CASE("ties use the normal approximation with corrections") {
  // Reference values: scipy.stats.wilcoxon(d, correction=True, method="approx").
  const auto r = wilcoxon_signed_rank(from_differences({1, 1, -1, 2, 2, -3, 4, 4, 5, -2}));
  CHECK_FALSE(r.exact);
  CHECK(r.statistic == 14.0);
  CHECK(r.p_value == doctest::Approx(0.1825661844682832).epsilon(1e-9));
}

TEST_CASE("swapping the runs leaves W and p unchanged") {
  const std::vector<std::pair<double, double>> ab{{0.9, 0.7}, {0.5, 0.6}, {0.3, 0.1},
                                                  {0.8, 0.4}, {0.2, 0.25}, {0.6, 0.61}};
  std::vector<std::pair<double, double>> ba;
  for (auto [a, b] : ab) ba.emplace_back(b, a);
  const auto r1 = wilcoxon_signed_rank(ab), r2 = wilcoxon_signed_rank(ba);
  CHECK(r1.statistic == r2.statistic);
  CHECK(r1.p_value == r2.p_value);
}

TEST_CASE("large samples use the normal approximation") {
  std::vector<double> d;
  for (int i = 1; i <= 60; ++i) d.push_back(i % 3 == 0 ? -i : i);
  const auto r = wilcoxon_signed_rank(from_differences(d));
  CHECK_FALSE(r.exact);
  CHECK(r.p_value > 0.0);
  CHECK(r.p_value <= 1.0);
}
