#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mer/corpus.hpp"

namespace mer {

// A run record is line-delimited JSON: one header line
//   {"record":"header", "harness_version", "config", "config_digest", "template_digest", "created_at"}
// followed by one line per inference
//   {"record":"sentence", "input_key", "prompt_hash", "example_keys", "raw_response",
//    "status":"ok"|"failed", "error", "attempt_count", "latency_ms", "timestamp"}.
// Later lines for the same key supersede earlier ones.

struct RunHeader {
  std::string harness_version;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::string config_digest;
  std::string template_digest;
  std::string created_at;
};

struct RunEntry {
  SentenceKey input_key;
  std::string prompt_hash;
  std::vector<SentenceKey> example_keys;
  std::string raw_response;
  bool ok = true;
  std::string error;
  int attempt_count = 0;
  std::int64_t latency_ms = 0;
  std::string timestamp;
};

struct RunRecord {
  RunHeader header;
  std::vector<RunEntry> entries;
  /// Lines that failed to parse (e.g. a torn final line after a crash).
  std::size_t skipped_lines = 0;

  /// Last entry per key.
  std::map<SentenceKey, const RunEntry*> latest() const;
};

class RunRecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunRecord read_run_record(const std::filesystem::path& path);

std::string header_to_json_line(const RunHeader& header);
std::string entry_to_json_line(const RunEntry& entry);

/// Append-only, flush-per-line writer. Thread-safe.
class RunRecordWriter {
 public:
  /// Rewrites `path` with `header` followed by `keep`, then appends.
  RunRecordWriter(const std::filesystem::path& path, const RunHeader& header,
                  const std::vector<RunEntry>& keep);

  void append(const RunEntry& entry);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

/// UTC timestamp, ISO-8601 with milliseconds.
std::string utc_timestamp();

}  // namespace mer
