#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mer/corpus.hpp"
#include "mer/prompt_builder.hpp"

namespace mer::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path template_dir();
PromptBuilder default_builder();

/// A surface form for `type` drawn from a small clinical vocabulary. Some
/// forms contain multi-byte characters and inner spaces.
std::string entity_phrase(EntityType type, std::mt19937_64& rng);

/// Filler words and entity phrases joined by single spaces. Entity types
/// are taken from `types` in order.
Sentence make_sentence(SentenceKey key, const std::vector<EntityType>& types, std::mt19937_64& rng);

/// `n` sentences, `per_doc` per document, 0..max_entities entities each.
/// Entity types cycle through all 18, so any corpus with >= 18 entities
/// covers every type.
std::vector<Sentence> synthetic_sentences(std::size_t n, std::uint64_t seed,
                                          std::size_t per_doc = 5, int max_entities = 4,
                                          const std::string& doc_prefix = "doc");

/// Exactly `n_entities` entities spread over `n_sentences` sentences.
Corpus corpus_with_entities(std::size_t n_sentences, std::size_t n_entities, std::uint64_t seed,
                            Split split = Split::test);

void write_corpus_file(const std::filesystem::path& path, const Corpus& corpus);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

// Binary store fixtures, written byte by byte without going through the
// library's writer.
using RawSentenceRecord = std::pair<std::string, std::vector<float>>;
using RawToken = std::tuple<std::uint32_t, std::uint32_t, std::vector<float>>;
using RawTokenRecord = std::pair<std::string, std::vector<RawToken>>;

std::string raw_store_header(std::uint8_t kind, std::uint32_t dim, std::uint64_t count,
                             std::uint8_t version = 1);
std::string raw_sentence_store(std::uint32_t dim, const std::vector<RawSentenceRecord>& records);
std::string raw_token_store(std::uint32_t dim, const std::vector<RawTokenRecord>& records);

/// Word spans (code points) of a sentence, as the embedding exporter emits them.
std::vector<std::pair<std::uint32_t, std::uint32_t>> word_spans(const std::string& text);

/// Random sentence/token stores covering every sentence of `corpus`.
std::string random_sentence_store(const Corpus& corpus, std::uint32_t dim, std::uint64_t seed);
std::string random_token_store(const Corpus& corpus, std::uint32_t dim, std::uint64_t seed);

/// Zero-shot run config against a mock endpoint ("mock://<behavior>").
nlohmann::json mock_config(const std::filesystem::path& test_corpus, const std::string& behavior,
                           int parallelism = 1);

}  // namespace mer::testing
