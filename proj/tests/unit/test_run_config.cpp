#include "doctest.h"
#include "fixtures.hpp"
#include "mer/run_config.hpp"

using namespace mer;
using nlohmann::json;

namespace {

std::string config_error(const json& j) {
  try {
    RunConfig::from_json(j).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

json few_shot() {
  return {{"mode", "few_shot"},
          {"train_corpus", "train.jsonl"},
          {"test_corpus", "test.jsonl"},
          {"store_train", "train.tok"},
          {"store_test", "test.tok"}};
}

}  // namespace

TEST_CASE("defaults") {
  const auto zero = RunConfig::from_json({{"test_corpus", "t.jsonl"}});
  CHECK(zero.mode == RunMode::zero_shot);
  CHECK(zero.prompt_variant == PromptVariant::strict);
  CHECK_FALSE(zero.selection);
  CHECK_FALSE(zero.k);
  CHECK(zero.client.temperature == 0.0);
  CHECK(zero.client.parallelism == 1);
  CHECK_NOTHROW(zero.validate());

  const auto few = RunConfig::from_json(few_shot());
  CHECK(few.selection == SelectionMethod::token);
  CHECK(few.k == 6);
  CHECK_NOTHROW(few.validate());

  const auto tuned = RunConfig::from_json({{"mode", "served_finetuned"}, {"test_corpus", "t"}});
  CHECK(tuned.prompt_variant == PromptVariant::baseline);
}

TEST_CASE("mode invariants") {
  auto j = few_shot();
  j.erase("store_test");
  CHECK(config_error(j).find("store_train and store_test") != std::string::npos);

  j = few_shot();
  j["k"] = 11;
  CHECK(config_error(j).find("k must be") != std::string::npos);

  j = few_shot();
  j["prompt_variant"] = "baseline";
  CHECK_FALSE(config_error(j).empty());

  CHECK_FALSE(config_error({{"test_corpus", "t"}, {"k", 3}}).empty());
  CHECK(config_error({{"mode", "zero_shot"}, {"test_corpus", "t"}}).empty());
  CHECK_FALSE(config_error(json::object()).empty());
}

TEST_CASE("rejects unknown fields and bad values") {
  CHECK(config_error({{"test_corpus", "t"}, {"temperature", 0}}).find("unknown config field") !=
        std::string::npos);
  CHECK(config_error({{"test_corpus", "t"}, {"client", {{"seed", 1}}}}).find("unknown client field") !=
        std::string::npos);
  CHECK_FALSE(config_error({{"test_corpus", "t"}, {"mode", "one_shot"}}).empty());
  CHECK_FALSE(config_error({{"test_corpus", "t"}, {"client", {{"parallelism", 0}}}}).empty());
  CHECK_FALSE(config_error({{"test_corpus", "t"}, {"client", {{"retries", "3"}}}}).empty());
  CHECK_FALSE(config_error({{"test_corpus", "t"}, {"lora_meta", 8}}).empty());
}

TEST_CASE("digest is stable and sensitive to every field") {
  const auto base = RunConfig::from_json(few_shot());
  CHECK(base.digest() == RunConfig::from_json(few_shot()).digest());
  CHECK(base.digest().size() == 64);

  auto j = few_shot();
  j["client"] = {{"temperature", 0.2}};
  CHECK(RunConfig::from_json(j).digest() != base.digest());
  j = few_shot();
  j["lora_meta"] = {{"r", 16}, {"lora_alpha", 32}, {"lora_dropout", 0.05},
                    {"target_modules", {"q_proj", "v_proj"}}};
  const auto with_lora = RunConfig::from_json(j);
  CHECK(with_lora.digest() != base.digest());
  CHECK(with_lora.to_json()["lora_meta"]["r"] == 16);
}

TEST_CASE("to_json and from_json round trip") {
  auto j = few_shot();
  j["client"] = {{"endpoint_url", "mock://echo_gold"}, {"max_tokens", 64}, {"retries", 0}};
  const auto cfg = RunConfig::from_json(j);
  const auto back = RunConfig::from_json(json::parse(cfg.to_json().dump()));
  CHECK(back.digest() == cfg.digest());
  CHECK(back.client.max_tokens == 64);
}

TEST_CASE("load resolves relative paths against the config file") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "cfg");
  testing::write_file(dir / "cfg" / "run.json", few_shot().dump());
  const auto cfg = RunConfig::load(dir / "cfg" / "run.json");
  CHECK(cfg.test_corpus == (dir / "cfg" / "test.jsonl").string());
  CHECK(cfg.resolved_definitions().filename() == "definitions.jsonl");

  testing::write_file(dir / "bad.json", "{ nope");
  CHECK_THROWS_AS(RunConfig::load(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load(dir / "missing.json"), ConfigError);
}
