// mer: corpus validation, example selection, inference and scoring.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mer/orchestrator.hpp"

namespace {

const std::vector<std::string> kSplits{"train", "test"};
const std::vector<std::string> kMethods{"sentence", "token"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Medical entity recognition evaluation harness"};
  app.set_version_flag("--version", std::string(mer::harness_version()));
  app.require_subcommand(1);

  std::string corpus;
  std::string split = "test";

  auto* validate = app.add_subcommand("validate", "Check a corpus file and print its statistics");
  validate->add_option("--corpus", corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  validate->add_option("--split", split, "train or test")
      ->check(CLI::IsMember(kSplits))
      ->capture_default_str();

  auto* stats = app.add_subcommand("stats", "Print corpus statistics as JSON");
  stats->add_option("--corpus", corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  stats->add_option("--split", split, "train or test")
      ->check(CLI::IsMember(kSplits))
      ->capture_default_str();

  mer::ExportOptions export_opt;
  auto* export_train = app.add_subcommand("export-train", "Write fine-tuning input/output pairs");
  export_train->add_option("--corpus", export_opt.corpus, "Train corpus JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  export_train->add_option("--templates", export_opt.templates_dir, "Prompt template directory");
  export_train->add_option("--definitions", export_opt.definitions, "Entity definitions JSONL");
  export_train->add_option("--out", export_opt.out, "Output JSONL")->required();

  mer::SelectOptions select_opt;
  std::string method(mer::to_string(select_opt.method));
  auto* select = app.add_subcommand("select", "Rank train sentences for every test sentence");
  select->add_option("--corpus", select_opt.corpus, "Test corpus JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  select->add_option("--store-train", select_opt.store_train, "Train embedding store")
      ->required()
      ->check(CLI::ExistingFile);
  select->add_option("--store-test", select_opt.store_test, "Test embedding store")
      ->required()
      ->check(CLI::ExistingFile);
  select->add_option("--method", method, "sentence or token")
      ->check(CLI::IsMember(kMethods))
      ->capture_default_str();
  select->add_option("--k", select_opt.k, "Number of examples")
      ->check(CLI::Range(1, static_cast<int>(mer::kMaxFewShotExamples)))
      ->capture_default_str();
  select->add_option("--out", select_opt.out, "Selection JSONL")->required();

  mer::InferOptions infer_opt;
  std::string selection_path;
  auto* infer = app.add_subcommand("infer", "Run (or resume) inference for a config");
  infer->add_option("--config", infer_opt.config, "Run config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  infer->add_option("--selection", selection_path, "Selection JSONL (few_shot)")
      ->check(CLI::ExistingFile);
  infer->add_option("--out", infer_opt.out, "Run record JSONL")->required();

  mer::EvalOptions eval_opt;
  std::string eval_config;
  auto* eval = app.add_subcommand("eval", "Score a run record against a corpus");
  eval->add_option("--run", eval_opt.run, "Run record JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--corpus", eval_opt.corpus, "Test corpus JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--config", eval_config, "Config to check against the recorded digests")
      ->check(CLI::ExistingFile);
  eval->add_option("--tolerance", eval_opt.offset_tolerance, "Offset tolerance in characters")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  eval->add_option("--out", eval_opt.out_dir, "Output directory")->required();

  std::string docs_a, docs_b;
  double alpha = 0.05;
  auto* compare = app.add_subcommand("compare", "Wilcoxon signed-rank test on per-document F1");
  compare->add_option("--a", docs_a, "docs.jsonl of run A")->required()->check(CLI::ExistingFile);
  compare->add_option("--b", docs_b, "docs.jsonl of run B")->required()->check(CLI::ExistingFile);
  compare->add_option("--alpha", alpha, "Significance level")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? mer::kExitOk : mer::kExitInvalid;
  }

  if (*validate) return mer::cmd_validate(corpus, mer::parse_split(split), std::cout, std::cerr);
  if (*stats) return mer::cmd_stats(corpus, mer::parse_split(split), std::cout, std::cerr);
  if (*export_train) return mer::cmd_export_train(export_opt, std::cout, std::cerr);
  if (*select) {
    select_opt.method = mer::parse_selection_method(method);
    return mer::cmd_select(select_opt, std::cout, std::cerr);
  }
  if (*infer) {
    if (!selection_path.empty()) infer_opt.selection = selection_path;
    return mer::cmd_infer(infer_opt, std::cout, std::cerr);
  }
  if (*eval) {
    if (!eval_config.empty()) eval_opt.config = eval_config;
    return mer::cmd_eval(eval_opt, std::cout, std::cerr);
  }
  if (*compare) return mer::cmd_compare(docs_a, docs_b, alpha, std::cout, std::cerr);
  return mer::kExitInvalid;
}
