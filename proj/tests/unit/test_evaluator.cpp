#include <algorithm>
#include <random>

#include "doctest.h"
#include "mer/evaluator.hpp"

using namespace mer;

namespace {

RawPrediction pred(const std::string& text, EntityType t, std::int64_t s, std::int64_t e) {
  return {text, std::string(to_tag(t)), s, e};
}

Counts count(const std::vector<RawPrediction>& p, const std::vector<EntitySpan>& g,
             int tolerance = 2) {
  return match_sentence(p, g, MatchRule{tolerance}).counts();
}

}  // namespace

TEST_CASE("is_match applies the +-2 rule to both offsets") {
  const EntitySpan g{"pneumonia", EntityType::dx_name, 10, 19};
  const MatchRule rule;
  CHECK(is_match(pred("pneumonia", EntityType::dx_name, 10, 19), g, rule));
  CHECK(is_match(pred("pneumonia", EntityType::dx_name, 12, 21), g, rule));
  CHECK(is_match(pred("pneumonia", EntityType::dx_name, 8, 17), g, rule));
  CHECK_FALSE(is_match(pred("pneumonia", EntityType::dx_name, 13, 19), g, rule));
  CHECK_FALSE(is_match(pred("pneumonia", EntityType::dx_name, 10, 22), g, rule));
  CHECK_FALSE(is_match(pred("pneumonia", EntityType::test_name, 10, 19), g, rule));
  CHECK_FALSE(is_match(pred("Pneumonia", EntityType::dx_name, 10, 19), g, rule));
  CHECK_FALSE(is_match({"pneumonia", "medication", 10, 19}, g, rule));
  CHECK_FALSE(is_match({"pneumonia", "dx_name", kUnanchored, kUnanchored}, g, rule));
  CHECK_FALSE(is_match(pred("pneumonia", EntityType::dx_name, 11, 20), g, MatchRule{0}));
}

TEST_CASE("match_sentence examples") {
  const std::vector<EntitySpan> golds{{"CHF", EntityType::dx_name, 0, 3},
                                      {"CBC", EntityType::test_name, 10, 13},
                                      {"Lasix", EntityType::brand_name, 20, 25}};

  SUBCASE("3 preds, 2 matchable") {
    const std::vector<RawPrediction> preds{pred("CHF", EntityType::dx_name, 0, 3),
                                           pred("CBC", EntityType::test_name, 11, 14),
                                           pred("Lasix", EntityType::generic_name, 20, 25)};
    CHECK(count(preds, golds) == Counts{2, 1, 1});
  }
  SUBCASE("no predictions") {
    CHECK(count({}, {golds[0], golds[1]}) == Counts{0, 0, 2});
  }
  SUBCASE("duplicate predictions consume one gold") {
    const std::vector<RawPrediction> preds{pred("CHF", EntityType::dx_name, 0, 3),
                                           pred("CHF", EntityType::dx_name, 1, 4)};
    CHECK(count(preds, {golds[0]}) == Counts{1, 1, 0});
  }
  SUBCASE("sentinel and invalid predictions never match") {
    const std::vector<RawPrediction> preds{{"CHF", "dx_name", kUnanchored, kUnanchored},
                                           {"CBC", "lab", 10, 13}};
    CHECK(count(preds, golds) == Counts{0, 2, 3});
  }
}

TEST_CASE("greedy order is by prediction and gold offsets") {
  // The earlier prediction takes the earlier gold, regardless of input order.
  const std::vector<EntitySpan> golds{{"flu", EntityType::dx_name, 6, 9},
                                      {"flu", EntityType::dx_name, 2, 5}};
  const std::vector<RawPrediction> preds{pred("flu", EntityType::dx_name, 4, 7),
                                         pred("flu", EntityType::dx_name, 3, 6)};
  const auto m = match_sentence(preds, golds, MatchRule{});
  REQUIRE(m.tp_pairs.size() == 2);
  CHECK(m.tp_pairs[0] == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(m.tp_pairs[1] == std::pair<std::size_t, std::size_t>{0, 0});
}

TEST_CASE("metrics follow the 0/0 convention") {
  const auto m = Metrics::from({2, 1, 1});
  CHECK(std::abs(m.precision - 2.0 / 3.0) < 1e-9);
  CHECK(std::abs(m.recall - 2.0 / 3.0) < 1e-9);
  CHECK(std::abs(m.f1 - 2.0 / 3.0) < 1e-9);

  const auto none = Metrics::from({0, 0, 5});
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(Metrics::from({}).f1 == 0.0);
  CHECK(Metrics::from({4, 0, 0}).f1 == 1.0);
}

TEST_CASE("tally attributes errors to types and counts invalid tags") {
  const std::vector<EntitySpan> golds{{"CHF", EntityType::dx_name, 0, 3},
                                      {"CBC", EntityType::test_name, 10, 13}};
  const std::vector<RawPrediction> preds{pred("CHF", EntityType::dx_name, 0, 3),
                                         pred("CBC", EntityType::brand_name, 10, 13),
                                         {"aspirin", "medication", 20, 27}};
  Tally t;
  t.add(preds, golds, match_sentence(preds, golds, MatchRule{}));
  CHECK(t.overall() == Counts{1, 2, 1});
  CHECK(t.for_type(EntityType::dx_name) == Counts{1, 0, 0});
  CHECK(t.for_type(EntityType::brand_name) == Counts{0, 1, 0});
  CHECK(t.for_type(EntityType::test_name) == Counts{0, 0, 1});
  CHECK(t.invalid_count() == 1);
  CHECK(t.predicted() == 3);

  const auto r = aggregate(t, "abc");
  CHECK(r.per_type.size() == 18);
  CHECK(r.invalid_pct == doctest::Approx(100.0 / 3.0));
  CHECK(r.config_digest == "abc");
  CHECK(r.n_sentences == 1);
  CHECK(aggregate(Tally{}).invalid_pct == 0.0);
  const auto table = format_report_table(r);
  CHECK(table.find("overall (micro)") != std::string::npos);
  CHECK(table.find("time_to_treatment_name") != std::string::npos);
}

TEST_CASE("totals, monotonicity and permutation invariance on random sentences") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> n_gold(0, 6), n_pred(0, 8), pos(0, 40), len(1, 6),
      shift(-4, 4), type_ix(0, 3), word(0, 2), coin(0, 9);
  const std::vector<std::string> words{"a", "b", "c"};
  std::vector<std::pair<std::vector<RawPrediction>, std::vector<EntitySpan>>> sentences;
  for (int i = 0; i < 400; ++i) {
    std::vector<EntitySpan> golds;
    for (int g = n_gold(rng); g > 0; --g) {
      const auto s = pos(rng);
      golds.push_back({words[word(rng)], kAllEntityTypes[type_ix(rng)], s, s + len(rng)});
    }
    std::vector<RawPrediction> preds;
    for (int p = n_pred(rng); p > 0; --p) {
      if (!golds.empty() && coin(rng) < 7) {
        const auto& g = golds[static_cast<std::size_t>(pos(rng)) % golds.size()];
        const auto d = shift(rng);
        preds.push_back({g.text, std::string(to_tag(g.type)), g.start + d, g.end + d});
      } else {
        const auto s = pos(rng);
        preds.push_back({words[word(rng)], coin(rng) == 0 ? "bogus" : std::string(to_tag(kAllEntityTypes[type_ix(rng)])),
                         s, s + len(rng)});
      }
    }
    sentences.emplace_back(std::move(preds), std::move(golds));
  }

  Tally forward;
  for (const auto& [p, g] : sentences) {
    const auto c = count(p, g);
    CHECK(c.tp + c.fn == g.size());
    CHECK(c.tp + c.fp == p.size());
    std::uint64_t prev = 0;
    for (int tol = 0; tol <= 6; ++tol) {
      const auto tp = count(p, g, tol).tp;
      CHECK(tp >= prev);
      prev = tp;
    }
    forward.add(p, g, match_sentence(p, g, MatchRule{}));
  }

  std::uint64_t tp_sum = 0, fp_sum = 0;
  for (auto t : kAllEntityTypes) {
    tp_sum += forward.for_type(t).tp;
    fp_sum += forward.for_type(t).fp;
  }
  CHECK(tp_sum == forward.overall().tp);
  CHECK(fp_sum + forward.invalid_count() == forward.overall().fp);

  std::shuffle(sentences.begin(), sentences.end(), rng);
  Tally left, right;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& [p, g] = sentences[i];
    (i % 2 ? left : right).add(p, g, match_sentence(p, g, MatchRule{}));
  }
  right.merge(left);
  const auto a = aggregate(forward), b = aggregate(right);
  CHECK(a.overall.tp == b.overall.tp);
  CHECK(a.overall.fp == b.overall.fp);
  CHECK(a.overall.fn == b.overall.fn);
  CHECK(a.overall.f1 == b.overall.f1);
  CHECK(a.invalid_pct == b.invalid_pct);
  for (auto t : kAllEntityTypes) CHECK(a.per_type.at(t).f1 == b.per_type.at(t).f1);

  const auto m = a.overall;
  CHECK(m.f1 >= 0.0);
  CHECK(m.f1 <= 1.0);
}
