#include <algorithm>
#include <charconv>
#include <random>
#include <thread>

#include "mer/digest.hpp"
#include "mer/llm_client.hpp"
#include "mer/utf8.hpp"

namespace mer {

namespace {

int parse_count(std::string_view text, std::string_view name) {
  const auto open = text.find('(');
  const auto close = text.rfind(')');
  if (open != name.size() || close != text.size() - 1) {
    throw std::invalid_argument("mock behavior '" + std::string(name) + "' needs an argument, e.g. " +
                                std::string(name) + "(2)");
  }
  const auto digits = text.substr(open + 1, close - open - 1);
  int n = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || n < 1) {
    throw std::invalid_argument("mock behavior argument must be a positive integer: " +
                                std::string(text));
  }
  return n;
}

std::uint64_t seed_of(const SentenceKey& key) {
  const auto hex = sha256_hex(key.str()).substr(0, 16);
  std::uint64_t seed = 0;
  std::from_chars(hex.data(), hex.data() + hex.size(), seed, 16);
  return seed;
}

}  // namespace

MockBehavior MockBehavior::parse(std::string_view text) {
  if (text == "echo_gold") return {Kind::echo_gold, 0};
  if (text == "shuffle_whitespace") return {Kind::shuffle_whitespace, 0};
  constexpr std::string_view drop = "drop_every_nth_entity";
  constexpr std::string_view inject = "inject_invalid_tag_every_nth";
  if (text.starts_with(drop)) return {Kind::drop_every_nth_entity, parse_count(text, drop)};
  if (text.starts_with(inject)) return {Kind::inject_invalid_tag_every_nth, parse_count(text, inject)};
  throw std::invalid_argument("unknown mock behavior '" + std::string(text) + "'");
}

std::string MockBehavior::str() const {
  switch (kind) {
    case Kind::echo_gold: return "echo_gold";
    case Kind::shuffle_whitespace: return "shuffle_whitespace";
    case Kind::drop_every_nth_entity: return "drop_every_nth_entity(" + std::to_string(n) + ")";
    case Kind::inject_invalid_tag_every_nth:
      return "inject_invalid_tag_every_nth(" + std::to_string(n) + ")";
  }
  return "unknown";
}

MockCompleter::MockCompleter(const Corpus& gold, MockBehavior behavior,
                             std::chrono::milliseconds delay)
    : gold_(gold), behavior_(behavior), delay_(delay) {
  std::vector<const Sentence*> order;
  for (const auto& s : gold_.sentences()) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const Sentence* a, const Sentence* b) { return a->key < b->key; });
  std::size_t next = 1;
  for (const auto* s : order) {
    first_ordinal_[s->key] = next;
    next += s->gold.size();
  }
}

std::string MockCompleter::response_for(const SentenceKey& key) const {
  const auto* sentence = gold_.find(key);
  if (!sentence) throw std::out_of_range("mock: no gold sentence for key " + key.str());

  Sentence altered = *sentence;
  altered.gold = sorted_spans(sentence->gold);
  const auto first = first_ordinal_.at(key);

  switch (behavior_.kind) {
    case MockBehavior::Kind::echo_gold:
      return serialize_markup(altered);

    case MockBehavior::Kind::drop_every_nth_entity: {
      std::vector<EntitySpan> kept;
      for (std::size_t i = 0; i < altered.gold.size(); ++i) {
        if ((first + i) % static_cast<std::size_t>(behavior_.n) != 0) kept.push_back(altered.gold[i]);
      }
      altered.gold = std::move(kept);
      return serialize_markup(altered);
    }

    case MockBehavior::Kind::inject_invalid_tag_every_nth: {
      // Build the markup by hand: the injected tag is not an EntityType.
      const auto text = utf8::decode(altered.text);
      std::string out;
      std::size_t cursor = 0;
      for (std::size_t i = 0; i < altered.gold.size(); ++i) {
        const auto& span = altered.gold[i];
        const bool inject = (first + i) % static_cast<std::size_t>(behavior_.n) == 0;
        const std::string tag(inject ? kInjectedInvalidTag : to_tag(span.type));
        out += utf8::slice(text, cursor, static_cast<std::size_t>(span.start));
        out += "<" + tag + ">" + span.text + "</" + tag + ">";
        cursor = static_cast<std::size_t>(span.end);
      }
      out += utf8::slice(text, cursor, text.size());
      return out;
    }

    case MockBehavior::Kind::shuffle_whitespace: {
      // Doubles roughly a third of the spaces, chosen by a key-seeded engine.
      std::mt19937_64 rng(seed_of(key));
      const auto markup = utf8::decode(serialize_markup(altered));
      std::u32string out;
      for (char32_t c : markup) {
        out.push_back(c);
        if (c == U' ' && rng() % 3 == 0) out.push_back(U' ');
      }
      return utf8::encode(out);
    }
  }
  return serialize_markup(altered);
}

Completion MockCompleter::complete(const AssembledPrompt& prompt) {
  const auto now = ++in_flight_;
  int seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  ++calls_;
  struct Leave {
    std::atomic<int>& counter;
    ~Leave() { --counter; }
  } leave{in_flight_};

  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  Completion c;
  c.raw_text = response_for(prompt.input_key);
  c.attempt_count = 1;
  c.latency_ms = delay_.count();
  return c;
}

}  // namespace mer
