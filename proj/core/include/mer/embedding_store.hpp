#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "mer/corpus.hpp"

namespace mer {

// Binary store layout (little-endian):
//   header  : "MERE" | version u8 = 1 | kind u8 | dim u32 | record_count u64
//   sentence: key_len u16 | key bytes ("docid#index") | dim x f32
//   token   : key_len u16 | key | token_count u32 | token_count x (start u32 | end u32 | dim x f32)

enum class StoreKind : std::uint8_t { sentence = 1, token = 2 };

class StoreFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pooled sentence vector.
struct SentenceEmbedding {
  SentenceKey key;
  std::vector<float> vector;
  double norm = 0.0;
};

/// One whitespace word of a sentence with its contextual vector.
struct TokenVector {
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  std::vector<float> vector;
  double norm = 0.0;
};

struct TokenEmbeddings {
  SentenceKey key;
  std::vector<TokenVector> tokens;
};

/// Immutable set of embeddings of one kind, all of dimension dim().
template <typename Record>
class Store {
 public:
  Store() = default;
  /// Recomputes norms and validates dimension and finiteness.
  Store(std::uint32_t dim, std::vector<Record> records);

  std::uint32_t dim() const noexcept { return dim_; }
  const std::vector<Record>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const Record* find(const SentenceKey& key) const;

 private:
  std::uint32_t dim_ = 0;
  std::vector<Record> records_;
  std::map<SentenceKey, std::size_t> index_;
};

using SentenceStore = Store<SentenceEmbedding>;
using TokenStore = Store<TokenEmbeddings>;

extern template class Store<SentenceEmbedding>;
extern template class Store<TokenEmbeddings>;

StoreKind peek_store_kind(const std::filesystem::path& path);

SentenceStore read_sentence_store(std::istream& in);
TokenStore read_token_store(std::istream& in);
SentenceStore load_sentence_store(const std::filesystem::path& path);
TokenStore load_token_store(const std::filesystem::path& path);

void write_store(std::ostream& out, const SentenceStore& store);
void write_store(std::ostream& out, const TokenStore& store);
void save_store(const std::filesystem::path& path, const SentenceStore& store);
void save_store(const std::filesystem::path& path, const TokenStore& store);

/// Euclidean norm accumulated in double precision.
double l2_norm(std::span<const float> v);

/// Cosine similarity in double precision. A zero-norm operand yields 0 and
/// bumps zero_norm_events(). Throws std::invalid_argument on size mismatch.
double cosine(std::span<const float> u, std::span<const float> v);

/// Count of zero-norm cosine evaluations since process start.
std::uint64_t zero_norm_events() noexcept;

struct SimilarityHit {
  SentenceKey key;
  double score = 0.0;

  friend bool operator==(const SimilarityHit&, const SimilarityHit&) = default;
};

/// Score descending, then key ascending.
bool ranks_before(const SimilarityHit& a, const SimilarityHit& b);

std::vector<SimilarityHit> topk_sentence(const SentenceEmbedding& query,
                                         const SentenceStore& candidates, int k);

/// Mean positional cosine over the first min(n_query, n_candidate) words.
double token_sentence_similarity(const TokenEmbeddings& query,
                                 const TokenEmbeddings& candidate);

std::vector<SimilarityHit> topk_token(const TokenEmbeddings& query,
                                      const TokenStore& candidates, int k);

}  // namespace mer
