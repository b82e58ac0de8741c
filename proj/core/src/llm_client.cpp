#include "mer/llm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace mer {

void ClientConfig::validate() const {
  if (endpoint_url.empty()) throw std::invalid_argument("client.endpoint_url is empty");
  if (!(temperature >= 0.0)) throw std::invalid_argument("client.temperature must be >= 0");
  if (max_tokens && *max_tokens < 1) throw std::invalid_argument("client.max_tokens must be >= 1");
  if (!(timeout_s > 0.0)) throw std::invalid_argument("client.timeout_s must be > 0");
  if (retries < 0) throw std::invalid_argument("client.retries must be >= 0");
  if (parallelism < 1) throw std::invalid_argument("client.parallelism must be >= 1");
  if (!(backoff_base_s >= 0.0)) throw std::invalid_argument("client.backoff_base_s must be >= 0");
}

int default_max_tokens(std::size_t input_chars) {
  const auto n = 2 * input_chars / 3 + 256;
  return static_cast<int>(std::min<std::size_t>(n, 2048));
}

std::string chat_request_body(const AssembledPrompt& prompt, const ClientConfig& cfg) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_tokens.value_or(default_max_tokens(prompt.input_length));
  body["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "user"}, {"content", prompt.text}}});
  return body.dump();
}

std::string parse_chat_response(std::string_view body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw CompletionError(CompletionError::Kind::protocol, 0,
                          std::string("response is not JSON: ") + e.what());
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw CompletionError(CompletionError::Kind::protocol, 0, "response has no choices");
  }
  const auto& first = (*choices)[0];
  const auto message = first.find("message");
  if (message == first.end() || !message->is_object()) {
    throw CompletionError(CompletionError::Kind::protocol, 0, "choices[0] has no message");
  }
  const auto content = message->find("content");
  if (content == message->end() || !content->is_string()) {
    throw CompletionError(CompletionError::Kind::protocol, 0,
                          "choices[0].message.content is missing or not a string");
  }
  return content->get<std::string>();
}

HttpCompleter::HttpCompleter(ClientConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto scheme_end = cfg_.endpoint_url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("endpoint_url must start with http:// or https://");
  }
  const auto scheme = cfg_.endpoint_url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw std::invalid_argument("unsupported endpoint scheme '" + scheme + "'");
  }
  const auto path_start = cfg_.endpoint_url.find('/', scheme_end + 3);
  origin_ = cfg_.endpoint_url.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? "" : cfg_.endpoint_url.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Completion HttpCompleter::complete(const AssembledPrompt& prompt) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();
  const auto body = chat_request_body(prompt, cfg_);
  const auto path = base_path_ + "/v1/chat/completions";

  httplib::Headers headers;
  if (const char* key = std::getenv("MER_API_KEY"); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  thread_local std::mt19937 jitter_rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(0.8, 1.2);

  const int max_attempts = cfg_.retries + 1;
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1) {
      const double delay_s = cfg_.backoff_base_s * std::pow(2.0, attempt - 2) * jitter(jitter_rng);
      sleeper_(std::chrono::milliseconds(static_cast<std::int64_t>(delay_s * 1000.0)));
    }
    httplib::Client client(origin_);
    const auto secs = static_cast<time_t>(cfg_.timeout_s);
    const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400) {
      throw CompletionError(CompletionError::Kind::configuration, attempt,
                            "HTTP " + std::to_string(res->status) + " from " + origin_ + path +
                                ": " + res->body.substr(0, 200));
    }
    if (res->status < 200 || res->status >= 300) {
      throw CompletionError(CompletionError::Kind::protocol, attempt,
                            "unexpected HTTP status " + std::to_string(res->status));
    }
    Completion c;
    try {
      c.raw_text = parse_chat_response(res->body);
    } catch (const CompletionError& e) {
      throw CompletionError(e.kind(), attempt, e.what());
    }
    c.attempt_count = attempt;
    c.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - started).count();
    return c;
  }
  throw CompletionError(CompletionError::Kind::transport, max_attempts,
                        "giving up after " + std::to_string(max_attempts) +
                            " attempts: " + last_error);
}

}  // namespace mer
