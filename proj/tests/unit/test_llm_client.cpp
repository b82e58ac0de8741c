#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "doctest.h"
#include "mer/llm_client.hpp"

using namespace mer;

namespace {

// Serves /v1/chat/completions from a scripted list of (status, body) replies;
// the last reply repeats once the script runs out.
class ScriptedServer {
 public:
  explicit ScriptedServer(std::vector<std::pair<int, std::string>> script, std::string prefix = "")
      : script_(std::move(script)) {
    server_.Post(prefix + "/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      requests_.push_back(req.body);
      auth_.push_back(req.get_header_value("Authorization"));
      const auto& [status, body] = script_[std::min(calls_, script_.size() - 1)];
      ++calls_;
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }

  std::string url(const std::string& prefix = "") const {
    return "http://127.0.0.1:" + std::to_string(port_) + prefix;
  }
  std::size_t calls() {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::string request(std::size_t i) {
    std::lock_guard lock(mu_);
    return requests_.at(i);
  }
  std::string auth(std::size_t i) {
    std::lock_guard lock(mu_);
    return auth_.at(i);
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<std::pair<int, std::string>> script_;
  std::vector<std::string> requests_;
  std::vector<std::string> auth_;
  std::size_t calls_ = 0;
};

const std::string kOk = R"({"choices":[{"message":{"role":"assistant","content":"<dx_name>CHF</dx_name>"}}]})";

AssembledPrompt prompt(const std::string& text = "hello", std::size_t input_length = 30) {
  AssembledPrompt p;
  p.text = text;
  p.input_key = {"d", 0};
  p.input_length = input_length;
  return p;
}

ClientConfig config_for(const std::string& url, int retries = 3) {
  ClientConfig cfg;
  cfg.endpoint_url = url;
  cfg.retries = retries;
  cfg.timeout_s = 5;
  cfg.backoff_base_s = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("request body is byte-stable and follows the chat schema") {
  ClientConfig cfg;
  cfg.model = "m";
  const auto p = prompt("say \"hi\"", 300);
  const auto body = chat_request_body(p, cfg);
  CHECK(body == chat_request_body(p, cfg));
  CHECK(body ==
        R"({"model":"m","temperature":0.0,"max_tokens":456,"messages":[{"role":"user","content":"say \"hi\""}]})");
  cfg.max_tokens = 7;
  CHECK(chat_request_body(p, cfg).find("\"max_tokens\":7") != std::string::npos);
}

TEST_CASE("default max_tokens") {
  CHECK(default_max_tokens(0) == 256);
  CHECK(default_max_tokens(300) == 456);
  CHECK(default_max_tokens(2688) == 2048);
  CHECK(default_max_tokens(100000) == 2048);
}

TEST_CASE("response parsing") {
  CHECK(parse_chat_response(kOk) == "<dx_name>CHF</dx_name>");
  auto kind_of = [](const std::string& body) {
    try {
      parse_chat_response(body);
    } catch (const CompletionError& e) {
      return e.kind();
    }
    return CompletionError::Kind::transport;
  };
  CHECK(kind_of(R"({"choices":[]})") == CompletionError::Kind::protocol);
  CHECK(kind_of(R"({})") == CompletionError::Kind::protocol);
  CHECK(kind_of("not json") == CompletionError::Kind::protocol);
  CHECK(kind_of(R"({"choices":[{"message":{"content":null}}]})") == CompletionError::Kind::protocol);
}

TEST_CASE("config validation") {
  ClientConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.temperature = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.retries = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.parallelism = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.endpoint_url = "ftp://x";
  CHECK_THROWS_AS(HttpCompleter{bad}, std::invalid_argument);
}

TEST_CASE("retries 5xx with exponential backoff, then succeeds") {
  ScriptedServer server({{500, "oops"}, {503, "busy"}, {200, kOk}});
  HttpCompleter client(config_for(server.url()));
  std::vector<std::chrono::milliseconds> sleeps;
  client.set_sleeper([&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  const auto c = client.complete(prompt());
  CHECK(c.raw_text == "<dx_name>CHF</dx_name>");
  CHECK(c.attempt_count == 3);
  CHECK(server.calls() == 3);
  REQUIRE(sleeps.size() == 2);
  CHECK(sleeps[0].count() >= 800);
  CHECK(sleeps[0].count() <= 1200);
  CHECK(sleeps[1].count() >= 1600);
  CHECK(sleeps[1].count() <= 2400);
}

TEST_CASE("4xx fails immediately as a configuration error") {
  ScriptedServer server({{404, "no such model"}});
  HttpCompleter client(config_for(server.url()));
  client.set_sleeper([](auto) {});
  try {
    client.complete(prompt());
    FAIL("expected CompletionError");
  } catch (const CompletionError& e) {
    CHECK(e.kind() == CompletionError::Kind::configuration);
    CHECK(e.attempt_count() == 1);
  }
  CHECK(server.calls() == 1);
}

TEST_CASE("exhausted retries are a transport error") {
  ScriptedServer server({{502, ""}});
  HttpCompleter client(config_for(server.url(), 2));
  client.set_sleeper([](auto) {});
  try {
    client.complete(prompt());
    FAIL("expected CompletionError");
  } catch (const CompletionError& e) {
    CHECK(e.kind() == CompletionError::Kind::transport);
    CHECK(e.attempt_count() == 3);
  }
  CHECK(server.calls() == 3);
}

TEST_CASE("unreachable endpoint is retried then reported") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpCompleter client(config_for("http://127.0.0.1:" + std::to_string(port), 1));
  int sleeps = 0;
  client.set_sleeper([&](auto) { ++sleeps; });
  try {
    client.complete(prompt());
    FAIL("expected CompletionError");
  } catch (const CompletionError& e) {
    CHECK(e.kind() == CompletionError::Kind::transport);
    CHECK(e.attempt_count() == 2);
  }
  CHECK(sleeps == 1);
}

TEST_CASE("empty choices is a protocol error") {
  ScriptedServer server({{200, R"({"choices":[]})"}});
  HttpCompleter client(config_for(server.url()));
  try {
    client.complete(prompt());
    FAIL("expected CompletionError");
  } catch (const CompletionError& e) {
    CHECK(e.kind() == CompletionError::Kind::protocol);
    CHECK(e.attempt_count() == 1);
  }
}

TEST_CASE("sends the documented body, base path and bearer token") {
  ScriptedServer server({{200, kOk}}, "/api");
  ::setenv("MER_API_KEY", "sekret", 1);
  auto cfg = config_for(server.url("/api/"));
  cfg.model = "llama3:8b-instruct";
  HttpCompleter client(cfg);
  const auto p = prompt("annotate this");
  client.complete(p);
  ::unsetenv("MER_API_KEY");
  client.complete(p);
  CHECK(server.request(0) == chat_request_body(p, cfg));
  CHECK(server.auth(0) == "Bearer sekret");
  CHECK(server.auth(1).empty());
}
