#include "mer/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "mer/markup_parser.hpp"
#include "mer/training_export.hpp"

namespace mer {

using nlohmann::json;
using nlohmann::ordered_json;

// ---- example selection -----------------------------------------------------

namespace {

template <typename StoreT, typename TopK>
std::vector<SelectionEntry> select_with(const Corpus& test, const StoreT& train_store,
                                        const StoreT& test_store, TopK topk) {
  std::vector<const Sentence*> order;
  for (const auto& s : test.sentences()) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const Sentence* a, const Sentence* b) { return a->key < b->key; });
  std::vector<SelectionEntry> out;
  out.reserve(order.size());
  for (const auto* s : order) {
    const auto* query = test_store.find(s->key);
    if (!query) throw std::invalid_argument("missing embedding for test sentence " + s->key.str());
    out.push_back({s->key, topk(*query, train_store)});
  }
  return out;
}

}  // namespace

std::vector<SelectionEntry> select_examples(const Corpus& test, const SentenceStore& train_store,
                                            const SentenceStore& test_store, int k) {
  return select_with(test, train_store, test_store,
                     [k](const SentenceEmbedding& q, const SentenceStore& c) {
                       return topk_sentence(q, c, k);
                     });
}

std::vector<SelectionEntry> select_examples(const Corpus& test, const TokenStore& train_store,
                                            const TokenStore& test_store, int k) {
  return select_with(test, train_store, test_store,
                     [k](const TokenEmbeddings& q, const TokenStore& c) {
                       return topk_token(q, c, k);
                     });
}

void write_selection(std::ostream& out, const std::vector<SelectionEntry>& entries) {
  for (const auto& e : entries) {
    ordered_json j;
    j["input_key"] = e.input_key.str();
    auto hits = ordered_json::array();
    for (const auto& h : e.hits) hits.push_back(ordered_json{{"key", h.key.str()}, {"score", h.score}});
    j["hits"] = std::move(hits);
    out << j.dump() << '\n';
  }
}

SelectionMap read_selection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read selection file " + path.string());
  SelectionMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      auto key = SentenceKey::parse(j.at("input_key").get<std::string>());
      std::vector<SimilarityHit> hits;
      for (const auto& h : j.at("hits")) {
        hits.push_back({SentenceKey::parse(h.at("key").get<std::string>()), h.at("score").get<double>()});
      }
      out[std::move(key)] = std::move(hits);
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed selection record: " + e.what());
    }
  }
  return out;
}

// ---- inference -------------------------------------------------------------

void run_bounded(std::size_t n, int parallelism, const std::function<void(std::size_t)>& task) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) task(i);
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(parallelism, 1)), n);
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
}

std::unique_ptr<Completer> make_completer(const ClientConfig& cfg, const Corpus& test_corpus) {
  constexpr std::string_view mock_scheme = "mock://";
  if (std::string_view(cfg.endpoint_url).starts_with(mock_scheme)) {
    cfg.validate();
    return std::make_unique<MockCompleter>(
        test_corpus, MockBehavior::parse(std::string_view(cfg.endpoint_url).substr(mock_scheme.size())));
  }
  return std::make_unique<HttpCompleter>(cfg);
}

namespace {

// Persists entries in slot order as soon as a contiguous prefix is ready.
class OrderedSink {
 public:
  OrderedSink(RunRecordWriter& writer, std::size_t n) : writer_(writer), slots_(n) {}

  void put(std::size_t i, RunEntry entry) {
    std::lock_guard lock(mu_);
    slots_[i] = std::move(entry);
    while (next_ < slots_.size() && slots_[next_]) {
      writer_.append(*slots_[next_]);
      slots_[next_].reset();
      ++next_;
    }
  }

 private:
  RunRecordWriter& writer_;
  std::mutex mu_;
  std::vector<std::optional<RunEntry>> slots_;
  std::size_t next_ = 0;
};

}  // namespace

InferenceSummary run_inference(const InferenceInputs& in, Completer& completer,
                               const std::filesystem::path& out, std::ostream& log) {
  const auto& cfg = in.config;
  const bool few_shot = cfg.mode == RunMode::few_shot;
  if (few_shot && (!in.train || !in.selection)) {
    throw ConfigError("few_shot inference needs a train corpus and a selection file");
  }

  std::vector<const Sentence*> order;
  for (const auto& s : in.test.sentences()) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const Sentence* a, const Sentence* b) { return a->key < b->key; });

  std::vector<AssembledPrompt> prompts;
  prompts.reserve(order.size());
  for (const auto* s : order) {
    std::vector<Sentence> examples;
    if (few_shot) {
      auto it = in.selection->find(s->key);
      if (it == in.selection->end()) {
        throw ConfigError("selection file has no entry for test sentence " + s->key.str());
      }
      const auto take = std::min(it->second.size(), static_cast<std::size_t>(*cfg.k));
      for (std::size_t i = 0; i < take; ++i) {
        const auto* ex = in.train->find(it->second[i].key);
        if (!ex) {
          throw ConfigError("selected example " + it->second[i].key.str() +
                            " is not in the train corpus");
        }
        examples.push_back(*ex);
      }
    }
    try {
      prompts.push_back(in.builder.build(cfg.prompt_variant, *s, examples));
    } catch (const PromptError& e) {
      throw ConfigError(std::string("prompt for ") + s->key.str() + ": " + e.what());
    }
  }

  RunHeader header;
  header.harness_version = std::string(harness_version());
  header.config = cfg.to_json();
  header.config_digest = cfg.digest();
  header.template_digest = in.builder.digest();
  header.created_at = utc_timestamp();

  std::vector<RunEntry> keep;
  std::set<SentenceKey> done;
  if (std::filesystem::exists(out)) {
    const auto previous = read_run_record(out);
    if (previous.header.config_digest != header.config_digest) {
      throw ConfigError("existing run record " + out.string() +
                        " was produced with a different config; choose another --out");
    }
    if (previous.header.template_digest != header.template_digest) {
      log << "warning: prompt templates changed since " << out.string() << " was started\n";
    }
    if (previous.skipped_lines) {
      log << "note: dropped " << previous.skipped_lines << " unreadable line(s) from "
          << out.string() << '\n';
    }
    header.created_at = previous.header.created_at;
    for (const auto& [key, entry] : previous.latest()) {
      if (entry->ok) {
        keep.push_back(*entry);
        done.insert(key);
      }
    }
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (!done.contains(prompts[i].input_key)) pending.push_back(i);
  }

  InferenceSummary summary;
  summary.total = prompts.size();
  summary.skipped = prompts.size() - pending.size();

  RunRecordWriter writer(out, header, keep);
  OrderedSink sink(writer, pending.size());
  std::mutex summary_mu;

  run_bounded(pending.size(), cfg.client.parallelism, [&](std::size_t slot) {
    const auto& prompt = prompts[pending[slot]];
    RunEntry entry;
    entry.input_key = prompt.input_key;
    entry.prompt_hash = prompt.prompt_hash;
    entry.example_keys = prompt.example_keys;
    try {
      auto completion = completer.complete(prompt);
      entry.raw_response = std::move(completion.raw_text);
      entry.attempt_count = completion.attempt_count;
      entry.latency_ms = completion.latency_ms;
    } catch (const CompletionError& e) {
      entry.ok = false;
      entry.error = e.what();
      entry.attempt_count = e.attempt_count();
    } catch (const std::exception& e) {
      entry.ok = false;
      entry.error = e.what();
    }
    entry.timestamp = utc_timestamp();
    {
      std::lock_guard lock(summary_mu);
      if (entry.ok) {
        ++summary.completed;
      } else {
        summary.failed.push_back(entry.input_key);
      }
    }
    sink.put(slot, std::move(entry));
  });
  std::sort(summary.failed.begin(), summary.failed.end());
  return summary;
}

// ---- evaluation ------------------------------------------------------------

Evaluation evaluate_run(const RunRecord& record, const Corpus& corpus, const MatchRule& rule) {
  const auto latest = record.latest();
  for (const auto& [key, entry] : latest) {
    if (!corpus.find(key)) {
      throw RunRecordError("run record has sentence " + key.str() + " which is not in the corpus");
    }
  }
  std::vector<const Sentence*> order;
  for (const auto& s : corpus.sentences()) {
    if (!latest.contains(s.key)) {
      throw RunRecordError("run record has no entry for corpus sentence " + s.key.str());
    }
    order.push_back(&s);
  }
  std::sort(order.begin(), order.end(),
            [](const Sentence* a, const Sentence* b) { return a->key < b->key; });

  Evaluation eval;
  Tally total;
  std::map<std::string, Tally> per_doc;
  for (const auto* s : order) {
    const auto* entry = latest.at(s->key);
    ParseOutcome outcome;
    if (entry->ok) {
      outcome = parse_response(entry->raw_response, s->text);
      ++eval.anchor_paths[std::string(to_string(outcome.path))];
      for (const auto& d : outcome.diagnostics) ++eval.diagnostics[std::string(to_string(d.kind))];
    } else {
      ++eval.failed_sentences;
    }
    const auto match = match_sentence(outcome.predictions, s->gold, rule);
    total.add(outcome.predictions, s->gold, match);
    per_doc[s->key.doc_id].add(outcome.predictions, s->gold, match);

    ordered_json line;
    line["input_key"] = s->key.str();
    line["status"] = entry->ok ? "ok" : "failed";
    line["anchor_path"] = entry->ok ? ordered_json(std::string(to_string(outcome.path))) : ordered_json();
    std::vector<bool> matched(outcome.predictions.size(), false);
    for (const auto& [p, g] : match.tp_pairs) matched[p] = true;
    auto preds = ordered_json::array();
    for (std::size_t i = 0; i < outcome.predictions.size(); ++i) {
      const auto& p = outcome.predictions[i];
      preds.push_back(ordered_json{{"text", p.text},
                                   {"tag", p.tag},
                                   {"start", p.start},
                                   {"end", p.end},
                                   {"valid_tag", parse_tag(p.tag).has_value()},
                                   {"matched", static_cast<bool>(matched[i])}});
    }
    line["predictions"] = std::move(preds);
    auto missed = ordered_json::array();
    for (auto g : match.fns) {
      const auto& span = s->gold[g];
      missed.push_back(ordered_json{{"text", span.text},
                                    {"type", std::string(to_tag(span.type))},
                                    {"start", span.start},
                                    {"end", span.end}});
    }
    line["missed_gold"] = std::move(missed);
    auto diags = ordered_json::array();
    for (const auto& d : outcome.diagnostics) {
      diags.push_back(ordered_json{{"kind", std::string(to_string(d.kind))},
                                   {"excerpt", d.excerpt},
                                   {"position", d.position}});
    }
    line["diagnostics"] = std::move(diags);
    eval.prediction_lines.push_back(line.dump());
  }

  eval.report = aggregate(total, record.header.config_digest);
  for (const auto& [doc, tally] : per_doc) {
    eval.documents.push_back({doc, Metrics::from(tally.overall())});
  }
  return eval;
}

namespace {

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  return j;
}

}  // namespace

ordered_json report_to_json(const Evaluation& eval, const RunHeader& header) {
  const auto& r = eval.report;
  ordered_json j;
  j["overall"] = metrics_json(r.overall);
  ordered_json per_type = ordered_json::object();
  for (const auto& [type, m] : r.per_type) per_type[std::string(to_tag(type))] = metrics_json(m);
  j["per_type"] = std::move(per_type);
  j["invalid_count"] = r.invalid_count;
  j["invalid_pct"] = r.invalid_pct;
  j["n_sentences"] = r.n_sentences;
  j["config_digest"] = r.config_digest;
  j["template_digest"] = header.template_digest;
  j["harness_version"] = header.harness_version;
  j["failed_sentences"] = eval.failed_sentences;
  ordered_json paths = ordered_json::object();
  for (const auto& [k, v] : eval.anchor_paths) paths[k] = v;
  j["anchor_paths"] = std::move(paths);
  ordered_json diags = ordered_json::object();
  for (const auto& [k, v] : eval.diagnostics) diags[k] = v;
  j["diagnostics"] = std::move(diags);
  return j;
}

std::string documents_to_jsonl(const std::vector<DocumentScore>& docs) {
  std::string out;
  for (const auto& d : docs) {
    ordered_json j;
    j["doc_id"] = d.doc_id;
    j["tp"] = d.metrics.tp;
    j["fp"] = d.metrics.fp;
    j["fn"] = d.metrics.fn;
    j["precision"] = d.metrics.precision;
    j["recall"] = d.metrics.recall;
    j["f1"] = d.metrics.f1;
    out += j.dump();
    out += '\n';
  }
  return out;
}

ComparisonResult compare_runs(const std::map<std::string, double>& a,
                              const std::map<std::string, double>& b, double alpha) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& [doc, f1] : a) {
    auto it = b.find(doc);
    if (it == b.end()) throw std::invalid_argument("document " + doc + " missing from run B");
    pairs.emplace_back(f1, it->second);
  }
  for (const auto& [doc, f1] : b) {
    if (!a.contains(doc)) throw std::invalid_argument("document " + doc + " missing from run A");
  }
  ComparisonResult r;
  r.n_documents = pairs.size();
  r.test = wilcoxon_signed_rank(pairs);
  r.significant = r.test.p_value < alpha;
  return r;
}

std::map<std::string, double> read_document_f1(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read document scores " + path.string());
  std::map<std::string, double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      auto doc = j.at("doc_id").get<std::string>();
      if (!out.emplace(doc, j.at("f1").get<double>()).second) {
        throw std::invalid_argument("duplicate doc_id " + doc);
      }
    } catch (const json::exception& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---- commands --------------------------------------------------------------

namespace {

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::ostream& print_stats(std::ostream& out, const CorpusStats& stats) {
  out << "documents: " << stats.n_documents << '\n'
      << "sentences: " << stats.n_sentences << '\n'
      << "words:     " << stats.n_words << '\n'
      << "entities:  " << stats.n_entities << '\n';
  for (auto type : kAllEntityTypes) {
    auto it = stats.per_type_counts.find(type);
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %-26s %zu\n", std::string(to_tag(type)).c_str(),
                  it == stats.per_type_counts.end() ? std::size_t{0} : it->second);
    out << buf;
  }
  return out;
}

}  // namespace

int cmd_validate(const std::filesystem::path& corpus, Split split, std::ostream& out,
                 std::ostream& err) {
  try {
    const auto c = load_corpus(corpus, split);
    out << corpus.string() << ": valid " << to_string(split) << " corpus\n";
    print_stats(out, compute_stats(c));
    return kExitOk;
  } catch (const CorpusError& e) {
    err << corpus.string() << ": " << e.what() << '\n';
    return kExitInvalid;
  }
}

int cmd_stats(const std::filesystem::path& corpus, Split split, std::ostream& out,
              std::ostream& err) {
  try {
    const auto stats = compute_stats(load_corpus(corpus, split));
    ordered_json j;
    j["n_documents"] = stats.n_documents;
    j["n_sentences"] = stats.n_sentences;
    j["n_words"] = stats.n_words;
    j["n_entities"] = stats.n_entities;
    ordered_json per_type = ordered_json::object();
    for (auto type : kAllEntityTypes) {
      auto it = stats.per_type_counts.find(type);
      per_type[std::string(to_tag(type))] = it == stats.per_type_counts.end() ? 0 : it->second;
    }
    j["per_type_counts"] = std::move(per_type);
    out << j.dump(2) << '\n';
    return kExitOk;
  } catch (const CorpusError& e) {
    err << corpus.string() << ": " << e.what() << '\n';
    return kExitInvalid;
  }
}

int cmd_export_train(const ExportOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto dir = opt.templates_dir.empty() ? default_template_dir() : opt.templates_dir;
    const auto defs = opt.definitions.empty() ? dir / "definitions.jsonl" : opt.definitions;
    const PromptBuilder builder(PromptTemplates::load(dir), EntityDefinitions::load(defs));
    const auto corpus = load_corpus(opt.corpus, Split::train);
    const auto pairs = export_training_pairs(corpus, builder);
    std::ofstream file(opt.out, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + opt.out.string());
    write_training_pairs(file, pairs);
    out << "wrote " << pairs.size() << " training pairs to " << opt.out.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "export-train: " << e.what() << '\n';
    return kExitInvalid;
  }
}

int cmd_select(const SelectOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto corpus = load_corpus(opt.corpus, Split::test);
    std::vector<SelectionEntry> entries;
    const auto before = zero_norm_events();
    if (opt.method == SelectionMethod::sentence) {
      entries = select_examples(corpus, load_sentence_store(opt.store_train),
                                load_sentence_store(opt.store_test), opt.k);
    } else {
      entries = select_examples(corpus, load_token_store(opt.store_train),
                                load_token_store(opt.store_test), opt.k);
    }
    if (const auto zero = zero_norm_events() - before; zero > 0) {
      err << "warning: " << zero << " cosine evaluation(s) involved a zero vector and scored 0\n";
    }
    std::ofstream file(opt.out, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + opt.out.string());
    write_selection(file, entries);
    out << "selected top-" << opt.k << " " << to_string(opt.method) << "-level examples for "
        << entries.size() << " sentences -> " << opt.out.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "select: " << e.what() << '\n';
    return kExitInvalid;
  }
}

int cmd_infer(const InferOptions& opt, std::ostream& out, std::ostream& err,
              Completer* completer) {
  try {
    const auto cfg = RunConfig::load(opt.config);
    cfg.validate();
    const bool few_shot = cfg.mode == RunMode::few_shot;
    if (few_shot && !opt.selection) throw ConfigError("few_shot runs need --selection");
    if (!few_shot && opt.selection) throw ConfigError("--selection applies to few_shot runs only");

    const PromptBuilder builder(PromptTemplates::load(cfg.resolved_templates_dir()),
                                EntityDefinitions::load(cfg.resolved_definitions()));
    const auto test = load_corpus(cfg.test_corpus, Split::test);
    std::optional<Corpus> train;
    std::optional<SelectionMap> selection;
    if (few_shot) {
      train = load_corpus(cfg.train_corpus, Split::train);
      selection = read_selection(*opt.selection);
    }

    std::unique_ptr<Completer> owned;
    if (!completer) {
      owned = make_completer(cfg.client, test);
      completer = owned.get();
    }
    const InferenceInputs inputs{cfg, test, train ? &*train : nullptr,
                                 selection ? &*selection : nullptr, builder};
    const auto summary = run_inference(inputs, *completer, opt.out, err);
    out << "sentences: " << summary.total << ", skipped (already done): " << summary.skipped
        << ", completed: " << summary.completed << ", failed: " << summary.failed.size() << '\n';
    for (const auto& key : summary.failed) out << "  failed: " << key.str() << '\n';
    return summary.failed.empty() ? kExitOk : kExitPartial;
  } catch (const std::exception& e) {
    err << "infer: " << e.what() << '\n';
    return kExitInvalid;
  }
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto record = read_run_record(opt.run);
    const auto corpus = load_corpus(opt.corpus, Split::test);

    if (record.header.harness_version != harness_version()) {
      err << "warning: run recorded with harness " << record.header.harness_version
          << ", evaluating with " << harness_version() << '\n';
    }
    if (opt.config) {
      const auto cfg = RunConfig::load(*opt.config);
      if (cfg.digest() != record.header.config_digest) {
        err << "warning: config digest differs from the one recorded at inference time\n";
      }
      try {
        const PromptBuilder builder(PromptTemplates::load(cfg.resolved_templates_dir()),
                                    EntityDefinitions::load(cfg.resolved_definitions()));
        if (builder.digest() != record.header.template_digest) {
          err << "warning: template digest differs from the one recorded at inference time\n";
        }
      } catch (const PromptError& e) {
        err << "warning: cannot check template digest: " << e.what() << '\n';
      }
    }

    const auto eval = evaluate_run(record, corpus, MatchRule{opt.offset_tolerance});
    std::filesystem::create_directories(opt.out_dir);
    write_text_file(opt.out_dir / "report.json", report_to_json(eval, record.header).dump(2) + "\n");
    write_text_file(opt.out_dir / "report.txt", format_report_table(eval.report));
    write_text_file(opt.out_dir / "docs.jsonl", documents_to_jsonl(eval.documents));
    std::string preds;
    for (const auto& l : eval.prediction_lines) preds += l + "\n";
    write_text_file(opt.out_dir / "predictions.jsonl", preds);
    out << format_report_table(eval.report);
    return kExitOk;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return kExitInvalid;
  }
}

int cmd_compare(const std::filesystem::path& docs_a, const std::filesystem::path& docs_b,
                double alpha, std::ostream& out, std::ostream& err) {
  try {
    const auto r = compare_runs(read_document_f1(docs_a), read_document_f1(docs_b), alpha);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "documents: %zu (nonzero differences: %zu)\nW: %g\np-value: %.6g (%s)\n"
                  "significant at alpha=%g: %s\n",
                  r.n_documents, r.test.n_used, r.test.statistic, r.test.p_value,
                  r.test.exact ? "exact" : "normal approximation", alpha,
                  r.significant ? "yes" : "no");
    out << buf;
    return kExitOk;
  } catch (const std::exception& e) {
    err << "compare: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace mer
