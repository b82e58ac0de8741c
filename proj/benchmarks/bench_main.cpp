#include <benchmark/benchmark.h>

#include <sstream>

#include "fixtures.hpp"
#include "mer/corpus.hpp"
#include "mer/embedding_store.hpp"
#include "mer/evaluator.hpp"
#include "mer/markup_parser.hpp"

namespace {

using namespace mer;

const Corpus& bench_corpus() {
  static const Corpus corpus(Split::train, testing::synthetic_sentences(2000, 7, 5, 4, "bench"));
  return corpus;
}

void BM_TopkSentence(benchmark::State& state) {
  const auto& corpus = bench_corpus();
  std::istringstream in(testing::random_sentence_store(corpus, 384, 1));
  const auto store = read_sentence_store(in);
  const auto& query = store.records().front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(topk_sentence(query, store, 6));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(store.records().size()));
}
BENCHMARK(BM_TopkSentence);

void BM_TopkToken(benchmark::State& state) {
  const auto& corpus = bench_corpus();
  std::istringstream in(testing::random_token_store(corpus, 64, 2));
  const auto store = read_token_store(in);
  const auto& query = store.records().front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(topk_token(query, store, 6));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(store.records().size()));
}
BENCHMARK(BM_TopkToken);

void BM_ParseResponse(benchmark::State& state) {
  const auto& sentences = bench_corpus().sentences();
  std::vector<std::string> responses;
  for (const auto& s : sentences) responses.push_back(serialize_markup(s));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_response(responses[i], sentences[i].text));
    i = (i + 1) % sentences.size();
  }
}
BENCHMARK(BM_ParseResponse);

void BM_MatchSentence(benchmark::State& state) {
  const auto& sentences = bench_corpus().sentences();
  std::vector<std::vector<RawPrediction>> preds;
  for (const auto& s : sentences) {
    preds.push_back(parse_response(serialize_markup(s), s.text).predictions);
  }
  const MatchRule rule;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(match_sentence(preds[i], sentences[i].gold, rule));
    i = (i + 1) % sentences.size();
  }
}
BENCHMARK(BM_MatchSentence);

}  // namespace

BENCHMARK_MAIN();
