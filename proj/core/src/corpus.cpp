#include "mer/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "mer/utf8.hpp"

namespace mer {

using nlohmann::json;

std::string SentenceKey::str() const {
  return doc_id + "#" + std::to_string(sent_index);
}

SentenceKey SentenceKey::parse(std::string_view key) {
  const auto hash = key.rfind('#');
  if (hash == std::string_view::npos || hash + 1 == key.size()) {
    throw std::invalid_argument("malformed sentence key '" + std::string(key) + "'");
  }
  const auto digits = key.substr(hash + 1);
  std::uint32_t index = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
    throw std::invalid_argument("malformed sentence key '" + std::string(key) + "'");
  }
  return SentenceKey{std::string(key.substr(0, hash)), index};
}

std::string_view to_string(Split split) {
  return split == Split::train ? "train" : "test";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

CorpusError::CorpusError(std::size_t line, const std::string& message)
    : std::runtime_error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
      line_(line) {}

std::vector<EntitySpan> sorted_spans(std::vector<EntitySpan> spans) {
  std::stable_sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) {
    return std::tie(a.start, a.end) < std::tie(b.start, b.end);
  });
  return spans;
}

void validate_sentence(const Sentence& sentence) {
  const auto key = sentence.key.str();
  if (sentence.text.find_first_of("\r\n") != std::string::npos) {
    throw CorpusError(0, "line break in sentence text at " + key);
  }
  if (!utf8::is_valid(sentence.text)) {
    throw CorpusError(0, "invalid UTF-8 in sentence text at " + key);
  }
  const auto text = utf8::decode(sentence.text);
  const auto length = static_cast<std::int64_t>(text.size());
  for (const auto& span : sentence.gold) {
    if (span.start < 0 || span.start >= span.end || span.end > length) {
      throw CorpusError(0, "span offsets [" + std::to_string(span.start) + "," +
                               std::to_string(span.end) + ") out of range for '" + span.text +
                               "' at " + key);
    }
    auto actual = utf8::slice(text, static_cast<std::size_t>(span.start),
                              static_cast<std::size_t>(span.end));
    if (actual != span.text) {
      throw CorpusError(0, "span text mismatch at " + key + ": expected '" + span.text +
                               "' but slice [" + std::to_string(span.start) + "," +
                               std::to_string(span.end) + ") is '" + actual + "'");
    }
  }
  const auto spans = sorted_spans(sentence.gold);
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].start < spans[i - 1].end) {
      throw CorpusError(0, "overlapping gold spans at " + key);
    }
  }
}

Corpus::Corpus(Split split, std::vector<Sentence> sentences)
    : split_(split), sentences_(std::move(sentences)) {
  for (std::size_t i = 0; i < sentences_.size(); ++i) {
    validate_sentence(sentences_[i]);
    if (!index_.emplace(sentences_[i].key, i).second) {
      throw CorpusError(0, "duplicate sentence key " + sentences_[i].key.str());
    }
  }
}

const Sentence* Corpus::find(const SentenceKey& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &sentences_[it->second];
}

namespace {

template <typename T>
T required(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw CorpusError(line, std::string("malformed record: missing field '") + field + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw CorpusError(line, std::string("malformed record: field '") + field + "' has wrong type");
  }
}

std::int64_t required_int(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_number_integer()) {
    throw CorpusError(line, std::string("malformed record: field '") + field +
                                "' must be an integer");
  }
  return it->get<std::int64_t>();
}

Sentence sentence_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw CorpusError(line, "malformed record: not a JSON object");
  Sentence s;
  s.key.doc_id = required<std::string>(obj, "doc_id", line);
  const auto index = required_int(obj, "sent_index", line);
  if (index < 0 || index > std::numeric_limits<std::uint32_t>::max()) {
    throw CorpusError(line, "malformed record: sent_index out of range");
  }
  s.key.sent_index = static_cast<std::uint32_t>(index);
  s.text = required<std::string>(obj, "text", line);
  auto entities = obj.find("entities");
  if (entities == obj.end() || !entities->is_array()) {
    throw CorpusError(line, "malformed record: 'entities' must be an array");
  }
  for (const auto& e : *entities) {
    if (!e.is_object()) throw CorpusError(line, "malformed record: entity is not an object");
    EntitySpan span;
    span.text = required<std::string>(e, "text", line);
    const auto tag = required<std::string>(e, "type", line);
    const auto type = parse_tag(tag);
    if (!type) {
      throw CorpusError(line, "unknown entity tag '" + tag + "' at " + s.key.str());
    }
    span.type = *type;
    span.start = required_int(e, "start", line);
    span.end = required_int(e, "end", line);
    s.gold.push_back(std::move(span));
  }
  return s;
}

}  // namespace

Corpus parse_corpus(std::istream& in, Split split) {
  std::vector<Sentence> sentences;
  std::set<SentenceKey> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError(line_no, std::string("malformed record: ") + e.what());
    }
    auto sentence = sentence_from_json(obj, line_no);
    try {
      validate_sentence(sentence);
    } catch (const CorpusError& e) {
      throw CorpusError(line_no, e.what());
    }
    if (!seen.insert(sentence.key).second) {
      throw CorpusError(line_no, "duplicate sentence key " + sentence.key.str());
    }
    sentences.push_back(std::move(sentence));
  }
  return Corpus(split, std::move(sentences));
}

Corpus load_corpus(const std::filesystem::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw CorpusError(0, "cannot open corpus file " + path.string());
  return parse_corpus(in, split);
}

std::string sentence_to_json_line(const Sentence& sentence) {
  nlohmann::ordered_json obj;
  obj["doc_id"] = sentence.key.doc_id;
  obj["sent_index"] = sentence.key.sent_index;
  obj["text"] = sentence.text;
  auto entities = nlohmann::ordered_json::array();
  for (const auto& span : sentence.gold) {
    nlohmann::ordered_json e;
    e["text"] = span.text;
    e["type"] = std::string(to_tag(span.type));
    e["start"] = span.start;
    e["end"] = span.end;
    entities.push_back(std::move(e));
  }
  obj["entities"] = std::move(entities);
  return obj.dump();
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus.sentences()) out << sentence_to_json_line(s) << '\n';
}

CorpusStats compute_stats(const Corpus& corpus) {
  CorpusStats stats;
  std::set<std::string_view> docs;
  for (const auto& s : corpus.sentences()) {
    docs.insert(s.key.doc_id);
    stats.n_words += utf8::count_words(utf8::decode(s.text));
    for (const auto& span : s.gold) ++stats.per_type_counts[span.type];
    stats.n_entities += s.gold.size();
  }
  stats.n_documents = docs.size();
  stats.n_sentences = corpus.size();
  return stats;
}

std::string serialize_markup(const Sentence& sentence) {
  const auto text = utf8::decode(sentence.text);
  std::u32string out;
  out.reserve(text.size() + sentence.gold.size() * 32);
  std::size_t cursor = 0;
  for (const auto& span : sorted_spans(sentence.gold)) {
    const auto start = static_cast<std::size_t>(span.start);
    const auto end = static_cast<std::size_t>(span.end);
    const auto tag = to_tag(span.type);
    const std::u32string tag32(tag.begin(), tag.end());
    out.append(text, cursor, start - cursor);
    out += U'<';
    out += tag32;
    out += U'>';
    out.append(text, start, end - start);
    out += U"</";
    out += tag32;
    out += U'>';
    cursor = end;
  }
  out.append(text, cursor, std::u32string::npos);
  return utf8::encode(out);
}

}  // namespace mer
