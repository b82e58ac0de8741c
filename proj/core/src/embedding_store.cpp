#include "mer/embedding_store.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace mer {

namespace {

constexpr std::array<char, 4> kMagic = {'M', 'E', 'R', 'E'};
constexpr std::uint8_t kVersion = 1;

std::atomic<std::uint64_t> g_zero_norm_events{0};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw StoreFormatError(std::string("truncated store: unexpected end of file reading ") + what);
    }
  }

  template <typename UInt>
  UInt uint(const char* what) {
    std::array<unsigned char, sizeof(UInt)> buf{};
    bytes(reinterpret_cast<char*>(buf.data()), buf.size(), what);
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(uint<std::uint32_t>(what)); }

  bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

template <typename UInt>
void put_uint(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> buf{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf.data(), buf.size());
}

void put_f32(std::ostream& out, float f) { put_uint(out, std::bit_cast<std::uint32_t>(f)); }

struct Header {
  StoreKind kind;
  std::uint32_t dim;
  std::uint64_t count;
};

Header read_header(Reader& r) {
  std::array<char, 4> magic{};
  r.bytes(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw StoreFormatError("bad magic: not an embedding store");
  const auto version = r.uint<std::uint8_t>("version");
  if (version != kVersion) {
    throw StoreFormatError("unsupported store version " + std::to_string(version));
  }
  const auto kind = r.uint<std::uint8_t>("kind");
  if (kind != 1 && kind != 2) throw StoreFormatError("unknown store kind " + std::to_string(kind));
  const auto dim = r.uint<std::uint32_t>("dim");
  if (dim == 0) throw StoreFormatError("store dimension is 0");
  const auto count = r.uint<std::uint64_t>("record_count");
  return {static_cast<StoreKind>(kind), dim, count};
}

std::string_view kind_name(StoreKind k) { return k == StoreKind::sentence ? "sentence" : "token"; }

void expect_kind(const Header& h, StoreKind want) {
  if (h.kind != want) {
    throw StoreFormatError("store kind mismatch: file holds " + std::string(kind_name(h.kind)) +
                           " embeddings, expected " + std::string(kind_name(want)));
  }
}

SentenceKey read_key(Reader& r) {
  const auto len = r.uint<std::uint16_t>("key_len");
  std::string key(len, '\0');
  r.bytes(key.data(), len, "key");
  try {
    return SentenceKey::parse(key);
  } catch (const std::invalid_argument& e) {
    throw StoreFormatError(e.what());
  }
}

std::vector<float> read_vector(Reader& r, std::uint32_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = r.f32("vector component");
  return v;
}

void write_header(std::ostream& out, StoreKind kind, std::uint32_t dim, std::uint64_t count) {
  out.write(kMagic.data(), kMagic.size());
  put_uint<std::uint8_t>(out, kVersion);
  put_uint<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  put_uint<std::uint32_t>(out, dim);
  put_uint<std::uint64_t>(out, count);
}

void write_key(std::ostream& out, const SentenceKey& key) {
  const auto s = key.str();
  if (s.size() > 0xFFFF) throw StoreFormatError("sentence key too long: " + s.substr(0, 64));
  put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void check_vector(std::span<const float> v, std::uint32_t dim, const SentenceKey& key) {
  if (v.size() != dim) {
    throw StoreFormatError("vector of dimension " + std::to_string(v.size()) + " in a dim-" +
                           std::to_string(dim) + " store at " + key.str());
  }
  for (float x : v) {
    if (!std::isfinite(x)) throw StoreFormatError("non-finite vector component at " + key.str());
  }
}

double cosine_with_norms(std::span<const float> u, std::span<const float> v, double nu,
                         double nv) {
  if (nu == 0.0 || nv == 0.0) {
    g_zero_norm_events.fetch_add(1, std::memory_order_relaxed);
    return 0.0;
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  }
  return dot / (nu * nv);
}

std::vector<SimilarityHit> select_top(std::vector<SimilarityHit> hits, int k) {
  const auto take = std::min(hits.size(), static_cast<std::size_t>(k));
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(),
                    ranks_before);
  hits.resize(take);
  return hits;
}

void check_k(int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1, got " + std::to_string(k));
}

}  // namespace

template <typename Record>
Store<Record>::Store(std::uint32_t dim, std::vector<Record> records)
    : dim_(dim), records_(std::move(records)) {
  if (dim_ == 0) throw StoreFormatError("store dimension is 0");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    auto& rec = records_[i];
    if constexpr (std::is_same_v<Record, SentenceEmbedding>) {
      check_vector(rec.vector, dim_, rec.key);
      rec.norm = l2_norm(rec.vector);
    } else {
      std::uint32_t prev_end = 0;
      for (std::size_t t = 0; t < rec.tokens.size(); ++t) {
        auto& tok = rec.tokens[t];
        if (tok.start >= tok.end || (t > 0 && tok.start < prev_end)) {
          throw StoreFormatError("token spans not ascending and non-overlapping at " +
                                 rec.key.str());
        }
        prev_end = tok.end;
        check_vector(tok.vector, dim_, rec.key);
        tok.norm = l2_norm(tok.vector);
      }
    }
    if (!index_.emplace(rec.key, i).second) {
      throw StoreFormatError("duplicate key in store: " + rec.key.str());
    }
  }
}

template <typename Record>
const Record* Store<Record>::find(const SentenceKey& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &records_[it->second];
}

template class Store<SentenceEmbedding>;
template class Store<TokenEmbeddings>;

StoreKind peek_store_kind(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreFormatError("cannot open store file " + path.string());
  Reader r(in);
  return read_header(r).kind;
}

SentenceStore read_sentence_store(std::istream& in) {
  Reader r(in);
  const auto h = read_header(r);
  expect_kind(h, StoreKind::sentence);
  std::vector<SentenceEmbedding> records;
  records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(h.count, 1u << 20)));
  for (std::uint64_t i = 0; i < h.count; ++i) {
    SentenceEmbedding rec;
    rec.key = read_key(r);
    rec.vector = read_vector(r, h.dim);
    records.push_back(std::move(rec));
  }
  if (!r.at_eof()) throw StoreFormatError("trailing bytes after the last record");
  return SentenceStore(h.dim, std::move(records));
}

TokenStore read_token_store(std::istream& in) {
  Reader r(in);
  const auto h = read_header(r);
  expect_kind(h, StoreKind::token);
  std::vector<TokenEmbeddings> records;
  records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(h.count, 1u << 20)));
  for (std::uint64_t i = 0; i < h.count; ++i) {
    TokenEmbeddings rec;
    rec.key = read_key(r);
    const auto n = r.uint<std::uint32_t>("token_count");
    for (std::uint32_t t = 0; t < n; ++t) {
      TokenVector tok;
      tok.start = r.uint<std::uint32_t>("token start");
      tok.end = r.uint<std::uint32_t>("token end");
      tok.vector = read_vector(r, h.dim);
      rec.tokens.push_back(std::move(tok));
    }
    records.push_back(std::move(rec));
  }
  if (!r.at_eof()) throw StoreFormatError("trailing bytes after the last record");
  return TokenStore(h.dim, std::move(records));
}

SentenceStore load_sentence_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreFormatError("cannot open store file " + path.string());
  return read_sentence_store(in);
}

TokenStore load_token_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreFormatError("cannot open store file " + path.string());
  return read_token_store(in);
}

void write_store(std::ostream& out, const SentenceStore& store) {
  write_header(out, StoreKind::sentence, store.dim(), store.size());
  for (const auto& rec : store.records()) {
    write_key(out, rec.key);
    for (float x : rec.vector) put_f32(out, x);
  }
}

void write_store(std::ostream& out, const TokenStore& store) {
  write_header(out, StoreKind::token, store.dim(), store.size());
  for (const auto& rec : store.records()) {
    write_key(out, rec.key);
    put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(rec.tokens.size()));
    for (const auto& tok : rec.tokens) {
      put_uint<std::uint32_t>(out, tok.start);
      put_uint<std::uint32_t>(out, tok.end);
      for (float x : tok.vector) put_f32(out, x);
    }
  }
}

void save_store(const std::filesystem::path& path, const SentenceStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreFormatError("cannot write store file " + path.string());
  write_store(out, store);
}

void save_store(const std::filesystem::path& path, const TokenStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreFormatError("cannot write store file " + path.string());
  write_store(out, store);
}

double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(u.size()) +
                                " vs " + std::to_string(v.size()) + ")");
  }
  return cosine_with_norms(u, v, l2_norm(u), l2_norm(v));
}

std::uint64_t zero_norm_events() noexcept {
  return g_zero_norm_events.load(std::memory_order_relaxed);
}

bool ranks_before(const SimilarityHit& a, const SimilarityHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.key < b.key;
}

std::vector<SimilarityHit> topk_sentence(const SentenceEmbedding& query,
                                         const SentenceStore& candidates, int k) {
  check_k(k);
  if (candidates.empty()) throw std::invalid_argument("topk_sentence: empty candidate store");
  if (query.vector.size() != candidates.dim()) {
    throw std::invalid_argument("topk_sentence: query dimension " +
                                std::to_string(query.vector.size()) + " != store dimension " +
                                std::to_string(candidates.dim()));
  }
  const double query_norm = l2_norm(query.vector);
  std::vector<SimilarityHit> hits;
  hits.reserve(candidates.size());
  for (const auto& c : candidates.records()) {
    hits.push_back({c.key, cosine_with_norms(c.vector, query.vector, c.norm, query_norm)});
  }
  return select_top(std::move(hits), k);
}

namespace {

double mean_positional_cosine(const TokenEmbeddings& query, const TokenEmbeddings& candidate) {
  if (query.tokens.empty() || candidate.tokens.empty()) {
    throw std::invalid_argument("token_sentence_similarity: empty token list at " +
                                (query.tokens.empty() ? query.key : candidate.key).str());
  }
  const auto m = std::min(query.tokens.size(), candidate.tokens.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto& c = candidate.tokens[j];
    const auto& q = query.tokens[j];
    if (c.vector.size() != q.vector.size()) {
      throw std::invalid_argument("token_sentence_similarity: dimension mismatch");
    }
    sum += cosine_with_norms(c.vector, q.vector, c.norm, q.norm);
  }
  return sum / static_cast<double>(m);
}

TokenEmbeddings with_norms(TokenEmbeddings e) {
  for (auto& tok : e.tokens) tok.norm = l2_norm(tok.vector);
  return e;
}

}  // namespace

double token_sentence_similarity(const TokenEmbeddings& query, const TokenEmbeddings& candidate) {
  return mean_positional_cosine(with_norms(query), with_norms(candidate));
}

std::vector<SimilarityHit> topk_token(const TokenEmbeddings& query, const TokenStore& candidates,
                                      int k) {
  check_k(k);
  if (candidates.empty()) throw std::invalid_argument("topk_token: empty candidate store");
  for (const auto& tok : query.tokens) {
    if (tok.vector.size() != candidates.dim()) {
      throw std::invalid_argument("topk_token: query dimension " +
                                  std::to_string(tok.vector.size()) + " != store dimension " +
                                  std::to_string(candidates.dim()));
    }
  }
  const auto q = with_norms(query);
  std::vector<SimilarityHit> hits;
  hits.reserve(candidates.size());
  for (const auto& c : candidates.records()) {
    hits.push_back({c.key, mean_positional_cosine(q, c)});
  }
  return select_top(std::move(hits), k);
}

}  // namespace mer
