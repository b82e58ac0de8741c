#include "fixtures.hpp"

#include <array>
#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include "mer/utf8.hpp"

namespace mer::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("mer-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path template_dir() { return MER_TEST_TEMPLATE_DIR; }

PromptBuilder default_builder() {
  return PromptBuilder(PromptTemplates::load(template_dir()),
                       EntityDefinitions::load(template_dir() / "definitions.jsonl"));
}

namespace {

const std::array<std::vector<std::string>, kEntityTypeCount> kVocabulary = {{
    {"left lung", "abdomen", "right knee", "heart", "colon"},
    {"drinks socially", "two beers daily", "no alcohol"},
    {"penicillin allergy", "NKDA", "sulfa"},
    {"male", "female", "woman"},
    {"Caucasian", "Hispanic", "African American"},
    {"cocaine use", "marijuana", "IV drug use"},
    {"smoker", "20 pack-year history", "quit smoking"},
    {"pneumonia", "type 2 diabetes", "Sjögren syndrome", "CHF"},
    {"Lasix", "Coumadin", "Tylenol"},
    {"furosemide", "warfarin", "β-blocker", "acetaminophen"},
    {"cardiac catheterization", "appendectomy", "CABG"},
    {"chest x-ray", "CBC", "troponin", "MRI"},
    {"physical therapy", "dialysis", "oxygen"},
    {"3 years ago", "since 2010"},
    {"for 5 days", "x 2 weeks"},
    {"on day 3", "last month"},
    {"this morning", "on admission"},
    {"for 6 weeks", "until discharge"},
}};

const std::vector<std::string> kFiller = {
    "patient", "was", "noted", "with", "and", "history", "of", "the", "reported",
    "after",   "denies", "started", "on", "café", "follow-up", "→", "per", "team"};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

void put_le(std::string& out, std::uint64_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_le(out, std::bit_cast<std::uint32_t>(f), 4); }

void put_key(std::string& out, const std::string& key) {
  put_le(out, key.size(), 2);
  out += key;
}

std::vector<float> random_vector(std::uint32_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(dim);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

std::string entity_phrase(EntityType type, std::mt19937_64& rng) {
  return pick(kVocabulary[index_of(type)], rng);
}

Sentence make_sentence(SentenceKey key, const std::vector<EntityType>& types,
                       std::mt19937_64& rng) {
  Sentence s;
  s.key = std::move(key);
  std::size_t cp = 0;
  auto append = [&](const std::string& piece) {
    if (!s.text.empty()) {
      s.text += ' ';
      ++cp;
    }
    const auto start = cp;
    s.text += piece;
    cp += utf8::length(piece);
    return start;
  };
  std::uniform_int_distribution<int> filler_count(0, 3);
  for (auto type : types) {
    for (int i = filler_count(rng); i > 0; --i) append(pick(kFiller, rng));
    const auto phrase = entity_phrase(type, rng);
    const auto start = append(phrase);
    s.gold.push_back({phrase, type, static_cast<std::int64_t>(start),
                      static_cast<std::int64_t>(cp)});
  }
  for (int i = filler_count(rng) + 1; i > 0; --i) append(pick(kFiller, rng));
  return s;
}

std::vector<Sentence> synthetic_sentences(std::size_t n, std::uint64_t seed, std::size_t per_doc,
                                          int max_entities, const std::string& doc_prefix) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(0, max_entities);
  std::vector<Sentence> out;
  std::size_t next_type = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<EntityType> types(static_cast<std::size_t>(count(rng)));
    for (auto& t : types) t = kAllEntityTypes[next_type++ % kEntityTypeCount];
    char doc[32];
    std::snprintf(doc, sizeof doc, "%s%03zu", doc_prefix.c_str(), i / per_doc);
    out.push_back(
        make_sentence({doc, static_cast<std::uint32_t>(i % per_doc)}, types, rng));
  }
  return out;
}

Corpus corpus_with_entities(std::size_t n_sentences, std::size_t n_entities, std::uint64_t seed,
                            Split split) {
  std::mt19937_64 rng(seed);
  std::vector<Sentence> out;
  std::size_t next_type = 0;
  for (std::size_t i = 0; i < n_sentences; ++i) {
    const auto share = n_entities / n_sentences + (i < n_entities % n_sentences ? 1 : 0);
    std::vector<EntityType> types(share);
    for (auto& t : types) t = kAllEntityTypes[next_type++ % kEntityTypeCount];
    char doc[32];
    std::snprintf(doc, sizeof doc, "note%02zu", i / 4);
    out.push_back(make_sentence({doc, static_cast<std::uint32_t>(i % 4)}, types, rng));
  }
  return Corpus(split, std::move(out));
}

void write_corpus_file(const fs::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  write_corpus(out, corpus);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

std::string raw_store_header(std::uint8_t kind, std::uint32_t dim, std::uint64_t count,
                             std::uint8_t version) {
  std::string out = "MERE";
  out.push_back(static_cast<char>(version));
  out.push_back(static_cast<char>(kind));
  put_le(out, dim, 4);
  put_le(out, count, 8);
  return out;
}

std::string raw_sentence_store(std::uint32_t dim, const std::vector<RawSentenceRecord>& records) {
  auto out = raw_store_header(1, dim, records.size());
  for (const auto& [key, vec] : records) {
    put_key(out, key);
    for (float f : vec) put_f32(out, f);
  }
  return out;
}

std::string raw_token_store(std::uint32_t dim, const std::vector<RawTokenRecord>& records) {
  auto out = raw_store_header(2, dim, records.size());
  for (const auto& [key, tokens] : records) {
    put_key(out, key);
    put_le(out, tokens.size(), 4);
    for (const auto& [start, end, vec] : tokens) {
      put_le(out, start, 4);
      put_le(out, end, 4);
      for (float f : vec) put_f32(out, f);
    }
  }
  return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> word_spans(const std::string& text) {
  const auto cps = utf8::decode(text);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && utf8::is_space(cps[i])) ++i;
    if (i == cps.size()) break;
    const auto start = i;
    while (i < cps.size() && !utf8::is_space(cps[i])) ++i;
    out.emplace_back(static_cast<std::uint32_t>(start), static_cast<std::uint32_t>(i));
  }
  return out;
}

std::string random_sentence_store(const Corpus& corpus, std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<RawSentenceRecord> records;
  for (const auto& s : corpus.sentences()) records.emplace_back(s.key.str(), random_vector(dim, rng));
  return raw_sentence_store(dim, records);
}

std::string random_token_store(const Corpus& corpus, std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<RawTokenRecord> records;
  for (const auto& s : corpus.sentences()) {
    std::vector<RawToken> tokens;
    for (const auto& [start, end] : word_spans(s.text)) {
      tokens.emplace_back(start, end, random_vector(dim, rng));
    }
    records.emplace_back(s.key.str(), std::move(tokens));
  }
  return raw_token_store(dim, records);
}

nlohmann::json mock_config(const fs::path& test_corpus, const std::string& behavior,
                           int parallelism) {
  return {{"mode", "zero_shot"},
          {"test_corpus", test_corpus.string()},
          {"templates_dir", template_dir().string()},
          {"client", {{"endpoint_url", "mock://" + behavior}, {"parallelism", parallelism}}}};
}

}  // namespace mer::testing
