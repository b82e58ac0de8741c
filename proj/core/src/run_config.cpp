#include "mer/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "mer/digest.hpp"

#ifndef MER_DEFAULT_TEMPLATE_DIR
#define MER_DEFAULT_TEMPLATE_DIR "templates"
#endif

namespace mer {

using nlohmann::json;

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::zero_shot: return "zero_shot";
    case RunMode::few_shot: return "few_shot";
    case RunMode::served_finetuned: return "served_finetuned";
  }
  return "unknown";
}

RunMode parse_run_mode(std::string_view name) {
  if (name == "zero_shot") return RunMode::zero_shot;
  if (name == "few_shot") return RunMode::few_shot;
  if (name == "served_finetuned") return RunMode::served_finetuned;
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

std::string_view to_string(SelectionMethod method) {
  return method == SelectionMethod::sentence ? "sentence" : "token";
}

SelectionMethod parse_selection_method(std::string_view name) {
  if (name == "sentence") return SelectionMethod::sentence;
  if (name == "token") return SelectionMethod::token;
  throw ConfigError("unknown selection method '" + std::string(name) + "'");
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      dst = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
  }
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  std::optional<std::string> out;
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    std::string s;
    read_opt(j, key, s);
    out = std::move(s);
  }
  return out;
}

const std::set<std::string_view> kTopLevelKeys = {
    "mode",        "selection",   "k",           "prompt_variant", "client",
    "train_corpus", "test_corpus", "store_train", "store_test",     "templates_dir",
    "definitions", "lora_meta"};
const std::set<std::string_view> kClientKeys = {
    "endpoint_url", "model",       "temperature",   "max_tokens",
    "timeout_s",    "retries",     "parallelism",   "backoff_base_s"};

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kTopLevelKeys.contains(key)) throw ConfigError("unknown config field '" + key + "'");
  }
  RunConfig cfg;
  if (auto s = opt_string(j, "mode")) cfg.mode = parse_run_mode(*s);
  if (auto s = opt_string(j, "selection")) cfg.selection = parse_selection_method(*s);
  if (j.contains("k") && !j["k"].is_null()) {
    int k = 0;
    read_opt(j, "k", k);
    cfg.k = k;
  }
  if (auto s = opt_string(j, "prompt_variant")) {
    try {
      cfg.prompt_variant = parse_prompt_variant(*s);
    } catch (const PromptError& e) {
      throw ConfigError(e.what());
    }
  } else if (cfg.mode == RunMode::served_finetuned) {
    cfg.prompt_variant = PromptVariant::baseline;
  }
  if (cfg.mode == RunMode::few_shot) {
    if (!cfg.selection) cfg.selection = kDefaultSelection;
    if (!cfg.k) cfg.k = kDefaultTopK;
  }

  if (auto it = j.find("client"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("config field 'client' must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!kClientKeys.contains(key)) throw ConfigError("unknown client field '" + key + "'");
    }
    auto& c = cfg.client;
    read_opt(*it, "endpoint_url", c.endpoint_url);
    read_opt(*it, "model", c.model);
    read_opt(*it, "temperature", c.temperature);
    if (it->contains("max_tokens") && !(*it)["max_tokens"].is_null()) {
      int m = 0;
      read_opt(*it, "max_tokens", m);
      c.max_tokens = m;
    }
    read_opt(*it, "timeout_s", c.timeout_s);
    read_opt(*it, "retries", c.retries);
    read_opt(*it, "parallelism", c.parallelism);
    read_opt(*it, "backoff_base_s", c.backoff_base_s);
  }
  read_opt(j, "train_corpus", cfg.train_corpus);
  read_opt(j, "test_corpus", cfg.test_corpus);
  read_opt(j, "store_train", cfg.store_train);
  read_opt(j, "store_test", cfg.store_test);
  read_opt(j, "templates_dir", cfg.templates_dir);
  read_opt(j, "definitions", cfg.definitions);
  if (auto it = j.find("lora_meta"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ConfigError("config field 'lora_meta' must be an object");
    cfg.lora_meta = nlohmann::ordered_json::parse(it->dump());
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto cfg = from_json(j);
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  for (auto* p : {&cfg.train_corpus, &cfg.test_corpus, &cfg.store_train, &cfg.store_test,
                  &cfg.templates_dir, &cfg.definitions}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return cfg;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(mode));
  j["selection"] = selection ? nlohmann::ordered_json(std::string(to_string(*selection))) : nlohmann::ordered_json();
  j["k"] = k ? nlohmann::ordered_json(*k) : nlohmann::ordered_json();
  j["prompt_variant"] = std::string(to_string(prompt_variant));
  nlohmann::ordered_json c;
  c["endpoint_url"] = client.endpoint_url;
  c["model"] = client.model;
  c["temperature"] = client.temperature;
  c["max_tokens"] = client.max_tokens ? nlohmann::ordered_json(*client.max_tokens) : nlohmann::ordered_json();
  c["timeout_s"] = client.timeout_s;
  c["retries"] = client.retries;
  c["parallelism"] = client.parallelism;
  c["backoff_base_s"] = client.backoff_base_s;
  j["client"] = std::move(c);
  j["train_corpus"] = train_corpus;
  j["test_corpus"] = test_corpus;
  j["store_train"] = store_train;
  j["store_test"] = store_test;
  j["templates_dir"] = templates_dir;
  j["definitions"] = definitions;
  j["lora_meta"] = lora_meta;
  return j;
}

std::string RunConfig::digest() const { return sha256_hex(to_json().dump()); }

void RunConfig::validate() const {
  try {
    client.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (test_corpus.empty()) throw ConfigError("config: test_corpus is required");
  if (mode == RunMode::few_shot) {
    if (!selection || !k) throw ConfigError("config: few_shot requires selection and k");
    if (*k < 1 || static_cast<std::size_t>(*k) > kMaxFewShotExamples) {
      throw ConfigError("config: k must be in [1, " + std::to_string(kMaxFewShotExamples) + "]");
    }
    if (store_train.empty() || store_test.empty()) {
      throw ConfigError("config: few_shot requires store_train and store_test");
    }
    if (train_corpus.empty()) throw ConfigError("config: few_shot requires train_corpus");
    if (prompt_variant != PromptVariant::strict) {
      throw ConfigError("config: few_shot examples are only rendered by the strict prompt");
    }
  } else if (selection || k) {
    throw ConfigError("config: selection and k apply to few_shot runs only");
  }
}

std::filesystem::path RunConfig::resolved_templates_dir() const {
  return templates_dir.empty() ? default_template_dir() : std::filesystem::path(templates_dir);
}

std::filesystem::path RunConfig::resolved_definitions() const {
  return definitions.empty() ? resolved_templates_dir() / "definitions.jsonl"
                             : std::filesystem::path(definitions);
}

std::filesystem::path default_template_dir() {
  if (const char* env = std::getenv("MER_TEMPLATE_DIR"); env && *env) return env;
  return MER_DEFAULT_TEMPLATE_DIR;
}

std::string_view harness_version() {
#ifdef MER_VERSION
  return MER_VERSION;
#else
  return "0.0.0";
#endif
}

}  // namespace mer
