#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mer/entity_type.hpp"

namespace mer {

/// Identifies a sentence as (doc_id, sent_index). Serialized as "docid#index".
struct SentenceKey {
  std::string doc_id;
  std::uint32_t sent_index = 0;

  std::string str() const;
  /// Splits on the last '#'; throws std::invalid_argument on malformed keys.
  static SentenceKey parse(std::string_view key);

  friend auto operator<=>(const SentenceKey&, const SentenceKey&) = default;
  friend bool operator==(const SentenceKey&, const SentenceKey&) = default;
};

/// A labeled span. Offsets are code-point offsets, end exclusive.
struct EntitySpan {
  std::string text;
  EntityType type{};
  std::int64_t start = 0;
  std::int64_t end = 0;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

struct Sentence {
  SentenceKey key;
  std::string text;
  std::vector<EntitySpan> gold;
};

enum class Split { train, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

/// Ingest failure. `line()` is 1-based, or 0 when not tied to a source line.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Checks EntitySpan and Sentence invariants: slice equality, bounds,
/// no overlap, no line breaks. Throws CorpusError with line 0.
void validate_sentence(const Sentence& sentence);

/// Immutable, split-tagged collection of validated sentences.
class Corpus {
 public:
  Corpus() = default;
  /// Validates every sentence and key uniqueness.
  Corpus(Split split, std::vector<Sentence> sentences);

  Split split() const noexcept { return split_; }
  const std::vector<Sentence>& sentences() const noexcept { return sentences_; }
  std::size_t size() const noexcept { return sentences_.size(); }
  bool empty() const noexcept { return sentences_.empty(); }

  /// nullptr when absent.
  const Sentence* find(const SentenceKey& key) const;

 private:
  Split split_ = Split::train;
  std::vector<Sentence> sentences_;
  std::map<SentenceKey, std::size_t> index_;
};

/// Reads line-delimited JSON; blank lines are skipped. Order preserving.
Corpus parse_corpus(std::istream& in, Split split);
Corpus load_corpus(const std::filesystem::path& path, Split split);

/// Writes one JSON object per sentence with keys in schema order.
void write_corpus(std::ostream& out, const Corpus& corpus);
std::string sentence_to_json_line(const Sentence& sentence);

struct CorpusStats {
  std::size_t n_documents = 0;
  std::size_t n_sentences = 0;
  std::size_t n_words = 0;
  std::size_t n_entities = 0;
  std::map<EntityType, std::size_t> per_type_counts;
};

CorpusStats compute_stats(const Corpus& corpus);

/// Sentence text with each gold span wrapped as <tag>text</tag>.
std::string serialize_markup(const Sentence& sentence);

/// Gold spans sorted by (start, end).
std::vector<EntitySpan> sorted_spans(std::vector<EntitySpan> spans);

}  // namespace mer
