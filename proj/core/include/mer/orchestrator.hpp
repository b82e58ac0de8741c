#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mer/corpus.hpp"
#include "mer/embedding_store.hpp"
#include "mer/evaluator.hpp"
#include "mer/llm_client.hpp"
#include "mer/prompt_builder.hpp"
#include "mer/run_config.hpp"
#include "mer/run_record.hpp"
#include "mer/wilcoxon.hpp"

namespace mer {

/// Process exit codes of the mer commands.
enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitPartial = 2 };

// ---- example selection -----------------------------------------------------

struct SelectionEntry {
  SentenceKey input_key;
  std::vector<SimilarityHit> hits;
};

using SelectionMap = std::map<SentenceKey, std::vector<SimilarityHit>>;

/// Ranks the whole train store for every test sentence, in corpus key order.
/// Throws std::invalid_argument naming the first test key without an embedding.
std::vector<SelectionEntry> select_examples(const Corpus& test, const SentenceStore& train_store,
                                            const SentenceStore& test_store, int k);
std::vector<SelectionEntry> select_examples(const Corpus& test, const TokenStore& train_store,
                                            const TokenStore& test_store, int k);

/// Line-delimited {"input_key": "doc#i", "hits": [{"key": "doc#j", "score": s}, ...]}.
void write_selection(std::ostream& out, const std::vector<SelectionEntry>& entries);
SelectionMap read_selection(const std::filesystem::path& path);

// ---- inference -------------------------------------------------------------

/// Runs task(0..n-1) on at most `parallelism` threads. Tasks must not throw.
void run_bounded(std::size_t n, int parallelism, const std::function<void(std::size_t)>& task);

/// Mock for "mock://<behavior>" endpoints, HTTP otherwise.
std::unique_ptr<Completer> make_completer(const ClientConfig& cfg, const Corpus& test_corpus);

struct InferenceSummary {
  std::size_t total = 0;
  std::size_t skipped = 0;  // already present from an earlier run
  std::size_t completed = 0;
  std::vector<SentenceKey> failed;
};

struct InferenceInputs {
  const RunConfig& config;
  const Corpus& test;
  const Corpus* train = nullptr;           // few_shot only
  const SelectionMap* selection = nullptr;  // few_shot only
  const PromptBuilder& builder;
};

/// Builds every prompt first (so invalid examples fail before any request),
/// skips keys already completed in `out`, then fans requests out with bounded
/// parallelism and appends results to `out` in key order.
InferenceSummary run_inference(const InferenceInputs& in, Completer& completer,
                               const std::filesystem::path& out, std::ostream& log);

// ---- evaluation ------------------------------------------------------------

struct DocumentScore {
  std::string doc_id;
  Metrics metrics;
};

struct Evaluation {
  Report report;
  std::vector<DocumentScore> documents;
  std::map<std::string, std::uint64_t> anchor_paths;
  std::map<std::string, std::uint64_t> diagnostics;
  std::uint64_t failed_sentences = 0;
  std::vector<std::string> prediction_lines;  // predictions.jsonl content
};

/// Throws RunRecordError on a key mismatch between record and corpus.
/// Failed inferences are scored as empty predictions.
Evaluation evaluate_run(const RunRecord& record, const Corpus& corpus, const MatchRule& rule = {});

nlohmann::ordered_json report_to_json(const Evaluation& eval, const RunHeader& header);
std::string documents_to_jsonl(const std::vector<DocumentScore>& docs);

struct ComparisonResult {
  WilcoxonResult test;
  std::size_t n_documents = 0;
  bool significant = false;
};

/// Pairs per-document F1 by doc_id. Throws std::invalid_argument when the
/// key sets differ.
ComparisonResult compare_runs(const std::map<std::string, double>& a,
                              const std::map<std::string, double>& b, double alpha = 0.05);
std::map<std::string, double> read_document_f1(const std::filesystem::path& path);

// ---- commands --------------------------------------------------------------

struct SelectOptions {
  std::filesystem::path corpus;
  std::filesystem::path store_train;
  std::filesystem::path store_test;
  SelectionMethod method = kDefaultSelection;
  int k = kDefaultTopK;
  std::filesystem::path out;
};

struct InferOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> selection;
  std::filesystem::path out;
};

struct EvalOptions {
  std::filesystem::path run;
  std::filesystem::path corpus;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> config;  // checked against the recorded digest
  int offset_tolerance = 2;
};

struct ExportOptions {
  std::filesystem::path corpus;
  std::filesystem::path templates_dir;  // empty: default_template_dir()
  std::filesystem::path definitions;    // empty: <templates_dir>/definitions.jsonl
  std::filesystem::path out;
};

int cmd_validate(const std::filesystem::path& corpus, Split split, std::ostream& out,
                 std::ostream& err);
int cmd_stats(const std::filesystem::path& corpus, Split split, std::ostream& out,
              std::ostream& err);
int cmd_export_train(const ExportOptions& opt, std::ostream& out, std::ostream& err);
int cmd_select(const SelectOptions& opt, std::ostream& out, std::ostream& err);
/// `completer` overrides the one derived from the config (tests).
int cmd_infer(const InferOptions& opt, std::ostream& out, std::ostream& err,
              Completer* completer = nullptr);
int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err);
int cmd_compare(const std::filesystem::path& docs_a, const std::filesystem::path& docs_b,
                double alpha, std::ostream& out, std::ostream& err);

}  // namespace mer
