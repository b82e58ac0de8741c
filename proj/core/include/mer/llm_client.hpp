#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mer/corpus.hpp"
#include "mer/prompt_builder.hpp"

namespace mer {

struct ClientConfig {
  std::string endpoint_url = "http://localhost:11434";
  std::string model = "llama3:8b-instruct";
  double temperature = 0.0;
  std::optional<int> max_tokens;  // unset: derived from the input length
  double timeout_s = 120.0;
  int retries = 3;
  int parallelism = 1;
  double backoff_base_s = 1.0;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// 2 * input_chars / 3 + 256, capped at 2048.
int default_max_tokens(std::size_t input_chars);

struct Completion {
  std::string raw_text;
  std::int64_t latency_ms = 0;
  int attempt_count = 0;
};

class CompletionError : public std::runtime_error {
 public:
  enum class Kind { transport, configuration, protocol };

  CompletionError(Kind kind, int attempts, const std::string& message)
      : std::runtime_error(message), kind_(kind), attempts_(attempts) {}

  Kind kind() const noexcept { return kind_; }
  int attempt_count() const noexcept { return attempts_; }

 private:
  Kind kind_;
  int attempts_;
};

/// Turns an assembled prompt into raw model text. Implementations must be
/// safe to call from several worker threads at once.
class Completer {
 public:
  virtual ~Completer() = default;
  virtual Completion complete(const AssembledPrompt& prompt) = 0;
};

/// Serialized chat-completions request body. Byte-stable for equal inputs.
std::string chat_request_body(const AssembledPrompt& prompt, const ClientConfig& cfg);

/// Extracts choices[0].message.content; throws CompletionError(protocol).
std::string parse_chat_response(std::string_view body);

/// OpenAI-compatible client: POST {endpoint_url}/v1/chat/completions.
/// Retries transport failures and 5xx with exponential backoff
/// (base backoff_base_s, factor 2, +-20% jitter); 4xx fails immediately.
/// MER_API_KEY, when set, is sent as a bearer token.
class HttpCompleter : public Completer {
 public:
  explicit HttpCompleter(ClientConfig cfg);
  Completion complete(const AssembledPrompt& prompt) override;

  /// Injectable for tests; defaults to std::this_thread::sleep_for.
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) {
    sleeper_ = std::move(sleeper);
  }

 private:
  ClientConfig cfg_;
  std::string origin_;     // scheme://host[:port]
  std::string base_path_;  // path prefix from endpoint_url, no trailing '/'
  std::function<void(std::chrono::milliseconds)> sleeper_;
};

struct MockBehavior {
  enum class Kind { echo_gold, drop_every_nth_entity, inject_invalid_tag_every_nth, shuffle_whitespace };
  Kind kind = Kind::echo_gold;
  int n = 0;

  /// Accepts "echo_gold", "drop_every_nth_entity(N)",
  /// "inject_invalid_tag_every_nth(N)", "shuffle_whitespace".
  static MockBehavior parse(std::string_view text);
  std::string str() const;
};

/// Tag written by inject_invalid_tag_every_nth; outside the closed set.
inline constexpr std::string_view kInjectedInvalidTag = "medication";

/// Deterministic offline stand-in for a served model.
///
/// Answers from the gold corpus. Entity ordinals for the every-nth behaviors
/// are 1-based and global over the corpus sorted by (doc_id, sent_index), so
/// a sentence's output does not depend on request order.
class MockCompleter : public Completer {
 public:
  MockCompleter(const Corpus& gold, MockBehavior behavior,
                std::chrono::milliseconds delay = std::chrono::milliseconds{0});

  /// Throws std::out_of_range for keys absent from the gold corpus.
  Completion complete(const AssembledPrompt& prompt) override;

  /// The response for a key, without bookkeeping.
  std::string response_for(const SentenceKey& key) const;

  std::uint64_t call_count() const noexcept { return calls_.load(); }
  int max_in_flight() const noexcept { return max_in_flight_.load(); }
  const MockBehavior& behavior() const noexcept { return behavior_; }

 private:
  const Corpus& gold_;
  MockBehavior behavior_;
  std::chrono::milliseconds delay_;
  std::map<SentenceKey, std::size_t> first_ordinal_;  // ordinal of the sentence's first entity
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

}  // namespace mer
