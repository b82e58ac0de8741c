#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mer/llm_client.hpp"
#include "mer/prompt_builder.hpp"

namespace mer {

enum class RunMode { zero_shot, few_shot, served_finetuned };
enum class SelectionMethod { sentence, token };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view name);
std::string_view to_string(SelectionMethod method);
SelectionMethod parse_selection_method(std::string_view name);

inline constexpr int kDefaultTopK = 6;
inline constexpr SelectionMethod kDefaultSelection = SelectionMethod::token;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything that determines an inference run. JSON keys match field names;
/// `client` is a nested object with the ClientConfig field names.
struct RunConfig {
  RunMode mode = RunMode::zero_shot;
  std::optional<SelectionMethod> selection;  // few_shot only
  std::optional<int> k;                      // few_shot only
  PromptVariant prompt_variant = PromptVariant::strict;
  ClientConfig client;
  std::string train_corpus;
  std::string test_corpus;
  std::string store_train;
  std::string store_test;
  std::string templates_dir;  // empty: default_template_dir()
  std::string definitions;    // empty: <templates_dir>/definitions.jsonl
  nlohmann::ordered_json lora_meta = nlohmann::ordered_json::object();  // provenance only

  /// Applies mode-dependent defaults (few_shot: token selection, k = 6;
  /// served_finetuned: baseline prompt) for fields absent from `j`.
  static RunConfig from_json(const nlohmann::json& j);
  /// Loads a config file; relative paths resolve against its directory.
  static RunConfig load(const std::filesystem::path& path);

  nlohmann::ordered_json to_json() const;
  /// SHA-256 of the canonical JSON form.
  std::string digest() const;
  /// Throws ConfigError.
  void validate() const;

  std::filesystem::path resolved_templates_dir() const;
  std::filesystem::path resolved_definitions() const;
};

/// $MER_TEMPLATE_DIR if set, else the directory baked in at build time.
std::filesystem::path default_template_dir();

/// Library version recorded in run headers and reports.
std::string_view harness_version();

}  // namespace mer
