#include "mer/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <tuple>

namespace mer {

Metrics Metrics::from(const Counts& c) {
  Metrics m;
  m.tp = c.tp;
  m.fp = c.fp;
  m.fn = c.fn;
  const auto tp = static_cast<double>(c.tp);
  m.precision = c.tp + c.fp == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fn);
  m.f1 = m.precision + m.recall == 0.0
             ? 0.0
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

bool is_match(const RawPrediction& pred, const EntitySpan& gold, const MatchRule& rule) {
  if (!pred.anchored()) return false;
  const auto type = parse_tag(pred.tag);
  if (!type || *type != gold.type) return false;
  if (pred.text != gold.text) return false;
  const auto tol = static_cast<std::int64_t>(rule.offset_tolerance);
  return std::abs(pred.start - gold.start) <= tol && std::abs(pred.end - gold.end) <= tol;
}

SentenceMatch match_sentence(std::span<const RawPrediction> preds,
                             std::span<const EntitySpan> golds, const MatchRule& rule) {
  std::vector<std::size_t> pred_order(preds.size());
  std::iota(pred_order.begin(), pred_order.end(), 0);
  std::stable_sort(pred_order.begin(), pred_order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(preds[a].start, preds[a].end, preds[a].tag) <
           std::tie(preds[b].start, preds[b].end, preds[b].tag);
  });
  std::vector<std::size_t> gold_order(golds.size());
  std::iota(gold_order.begin(), gold_order.end(), 0);
  std::stable_sort(gold_order.begin(), gold_order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(golds[a].start, golds[a].end, golds[a].type) <
           std::tie(golds[b].start, golds[b].end, golds[b].type);
  });

  SentenceMatch out;
  std::vector<bool> consumed(golds.size(), false);
  for (auto p : pred_order) {
    bool matched = false;
    for (auto g : gold_order) {
      if (!consumed[g] && is_match(preds[p], golds[g], rule)) {
        consumed[g] = true;
        out.tp_pairs.emplace_back(p, g);
        matched = true;
        break;
      }
    }
    if (!matched) out.fps.push_back(p);
  }
  for (auto g : gold_order) {
    if (!consumed[g]) out.fns.push_back(g);
  }
  return out;
}

void Tally::add(std::span<const RawPrediction> preds, std::span<const EntitySpan> golds,
                const SentenceMatch& match) {
  ++sentences_;
  predicted_ += preds.size();
  overall_ += match.counts();
  for (const auto& [p, g] : match.tp_pairs) ++per_type_[index_of(golds[g].type)].tp;
  for (auto p : match.fps) {
    if (auto type = parse_tag(preds[p].tag)) ++per_type_[index_of(*type)].fp;
  }
  for (auto g : match.fns) ++per_type_[index_of(golds[g].type)].fn;
  for (const auto& pred : preds) {
    if (!parse_tag(pred.tag)) ++invalid_;
  }
}

void Tally::merge(const Tally& other) {
  overall_ += other.overall_;
  for (std::size_t i = 0; i < per_type_.size(); ++i) per_type_[i] += other.per_type_[i];
  invalid_ += other.invalid_;
  predicted_ += other.predicted_;
  sentences_ += other.sentences_;
}

Report aggregate(const Tally& tally, std::string config_digest) {
  Report r;
  r.overall = Metrics::from(tally.overall());
  for (auto type : kAllEntityTypes) r.per_type[type] = Metrics::from(tally.for_type(type));
  r.invalid_count = tally.invalid_count();
  r.invalid_pct = tally.predicted() == 0 ? 0.0
                                         : 100.0 * static_cast<double>(tally.invalid_count()) /
                                               static_cast<double>(tally.predicted());
  r.n_sentences = tally.sentences();
  r.config_digest = std::move(config_digest);
  return r;
}

namespace {

std::string row(std::string_view label, const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-26.*s %7llu %7llu %7llu %9.2f %9.2f %9.2f\n",
                static_cast<int>(label.size()), label.data(),
                static_cast<unsigned long long>(m.tp), static_cast<unsigned long long>(m.fp),
                static_cast<unsigned long long>(m.fn), 100.0 * m.precision, 100.0 * m.recall,
                100.0 * m.f1);
  return buf;
}

}  // namespace

std::string format_report_table(const Report& report) {
  std::ostringstream out;
  char head[160];
  std::snprintf(head, sizeof head, "%-26s %7s %7s %7s %9s %9s %9s\n", "entity_type", "tp", "fp",
                "fn", "P(%)", "R(%)", "F1(%)");
  out << head;
  out << std::string(80, '-') << '\n';
  for (const auto& [type, m] : report.per_type) out << row(to_tag(type), m);
  out << std::string(80, '-') << '\n';
  out << row("overall (micro)", report.overall);
  char tail[160];
  std::snprintf(tail, sizeof tail, "\ninvalid entities: %llu (%.2f%% of predicted)\nsentences: %llu\n",
                static_cast<unsigned long long>(report.invalid_count), report.invalid_pct,
                static_cast<unsigned long long>(report.n_sentences));
  out << tail;
  return out.str();
}

}  // namespace mer
