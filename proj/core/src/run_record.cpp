#include "mer/run_record.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace mer {

using nlohmann::json;
using nlohmann::ordered_json;

std::map<SentenceKey, const RunEntry*> RunRecord::latest() const {
  std::map<SentenceKey, const RunEntry*> out;
  for (const auto& e : entries) out[e.input_key] = &e;
  return out;
}

std::string header_to_json_line(const RunHeader& header) {
  ordered_json j;
  j["record"] = "header";
  j["harness_version"] = header.harness_version;
  j["config"] = header.config;
  j["config_digest"] = header.config_digest;
  j["template_digest"] = header.template_digest;
  j["created_at"] = header.created_at;
  return j.dump();
}

std::string entry_to_json_line(const RunEntry& entry) {
  ordered_json j;
  j["record"] = "sentence";
  j["input_key"] = entry.input_key.str();
  j["prompt_hash"] = entry.prompt_hash;
  auto keys = ordered_json::array();
  for (const auto& k : entry.example_keys) keys.push_back(k.str());
  j["example_keys"] = std::move(keys);
  j["raw_response"] = entry.raw_response;
  j["status"] = entry.ok ? "ok" : "failed";
  j["error"] = entry.error;
  j["attempt_count"] = entry.attempt_count;
  j["latency_ms"] = entry.latency_ms;
  j["timestamp"] = entry.timestamp;
  return j.dump();
}

namespace {

RunEntry entry_from_json(const json& j) {
  RunEntry e;
  e.input_key = SentenceKey::parse(j.at("input_key").get<std::string>());
  e.prompt_hash = j.value("prompt_hash", "");
  for (const auto& k : j.value("example_keys", json::array())) {
    e.example_keys.push_back(SentenceKey::parse(k.get<std::string>()));
  }
  e.raw_response = j.value("raw_response", "");
  e.ok = j.value("status", "ok") == "ok";
  e.error = j.value("error", "");
  e.attempt_count = j.value("attempt_count", 0);
  e.latency_ms = j.value("latency_ms", std::int64_t{0});
  e.timestamp = j.value("timestamp", "");
  return e;
}

}  // namespace

RunRecord read_run_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RunRecordError("cannot read run record " + path.string());
  RunRecord rec;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      ++rec.skipped_lines;
      continue;
    }
    const auto kind = j.value("record", "");
    try {
      if (kind == "header") {
        if (have_header) throw RunRecordError("second header line");
        rec.header.harness_version = j.value("harness_version", "");
        rec.header.config = ordered_json::parse(j.value("config", json::object()).dump());
        rec.header.config_digest = j.value("config_digest", "");
        rec.header.template_digest = j.value("template_digest", "");
        rec.header.created_at = j.value("created_at", "");
        have_header = true;
      } else if (kind == "sentence") {
        if (!have_header) throw RunRecordError("sentence line before the header");
        rec.entries.push_back(entry_from_json(j));
      } else {
        throw RunRecordError("unknown record type '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw RunRecordError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw RunRecordError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const RunRecordError& e) {
      throw RunRecordError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw RunRecordError(path.string() + ": missing header line");
  return rec;
}

RunRecordWriter::RunRecordWriter(const std::filesystem::path& path, const RunHeader& header,
                                 const std::vector<RunEntry>& keep) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw RunRecordError("cannot write run record " + tmp.string());
    out << header_to_json_line(header) << '\n';
    for (const auto& e : keep) out << entry_to_json_line(e) << '\n';
    out.flush();
    if (!out) throw RunRecordError("failed writing run record " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  out_.open(path, std::ios::app);
  if (!out_) throw RunRecordError("cannot append to run record " + path.string());
}

void RunRecordWriter::append(const RunEntry& entry) {
  const auto line = entry_to_json_line(entry);
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
}

std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto secs = system_clock::to_time_t(now);
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace mer
