#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mer/corpus.hpp"
#include "mer/markup_parser.hpp"

namespace mer {

struct MatchRule {
  int offset_tolerance = 2;
};

struct Counts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

/// Precision, recall and F1 with the 0/0 -> 0 convention.
struct Metrics {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static Metrics from(const Counts& c);
};

/// True iff texts and types are equal and both offsets lie within the
/// tolerance. Expects an anchored prediction with a valid tag; anything
/// else never matches.
bool is_match(const RawPrediction& pred, const EntitySpan& gold, const MatchRule& rule);

/// Result of one-to-one matching within a sentence. Indices refer to the
/// prediction and gold sequences passed to match_sentence.
struct SentenceMatch {
  std::vector<std::pair<std::size_t, std::size_t>> tp_pairs;  // (pred, gold)
  std::vector<std::size_t> fps;
  std::vector<std::size_t> fns;

  Counts counts() const { return {tp_pairs.size(), fps.size(), fns.size()}; }
};

/// Greedy: predictions in ascending (start, end, tag) order each take the
/// first unconsumed gold (ascending (start, end, type)) that matches.
SentenceMatch match_sentence(std::span<const RawPrediction> preds,
                             std::span<const EntitySpan> golds, const MatchRule& rule);

/// Commutative accumulator over sentence-level results.
class Tally {
 public:
  void add(std::span<const RawPrediction> preds, std::span<const EntitySpan> golds,
           const SentenceMatch& match);
  void merge(const Tally& other);

  const Counts& overall() const noexcept { return overall_; }
  const Counts& for_type(EntityType t) const { return per_type_[index_of(t)]; }
  std::uint64_t invalid_count() const noexcept { return invalid_; }
  std::uint64_t predicted() const noexcept { return predicted_; }
  std::uint64_t sentences() const noexcept { return sentences_; }

 private:
  Counts overall_;
  std::array<Counts, kEntityTypeCount> per_type_{};
  std::uint64_t invalid_ = 0;
  std::uint64_t predicted_ = 0;
  std::uint64_t sentences_ = 0;
};

struct Report {
  Metrics overall;
  std::map<EntityType, Metrics> per_type;
  std::uint64_t invalid_count = 0;
  double invalid_pct = 0.0;
  std::uint64_t n_sentences = 0;
  std::string config_digest;
};

/// Micro-averaged report; per_type lists all 18 types.
Report aggregate(const Tally& tally, std::string config_digest = {});

/// Aligned plain-text table of a report.
std::string format_report_table(const Report& report);

}  // namespace mer
