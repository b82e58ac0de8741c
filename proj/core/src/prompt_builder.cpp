#include "mer/prompt_builder.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mer/digest.hpp"
#include "mer/markup_parser.hpp"
#include "mer/utf8.hpp"

namespace mer {

namespace {

constexpr std::array<std::string_view, 6> kPlaceholders = {
    "task_description", "markup_guidelines", "entity_definitions",
    "strict_guidelines", "examples",         "input"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PromptError("cannot read template file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim_trailing(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

std::vector<std::string> placeholders_in(std::string_view tmpl) {
  std::vector<std::string> names;
  for (auto pos = tmpl.find("{{"); pos != std::string_view::npos; pos = tmpl.find("{{", pos + 2)) {
    const auto close = tmpl.find("}}", pos + 2);
    if (close == std::string_view::npos) break;
    names.emplace_back(tmpl.substr(pos + 2, close - pos - 2));
  }
  return names;
}

void require_placeholders(std::string_view file, std::string_view tmpl,
                          std::initializer_list<std::string_view> required) {
  const auto names = placeholders_in(tmpl);
  for (const auto& n : names) {
    if (std::find(kPlaceholders.begin(), kPlaceholders.end(), n) == kPlaceholders.end()) {
      throw PromptError(std::string(file) + ": unknown placeholder {{" + n + "}}");
    }
  }
  for (auto r : required) {
    if (std::count(names.begin(), names.end(), r) != 1) {
      throw PromptError(std::string(file) + ": placeholder {{" + std::string(r) +
                        "}} must appear exactly once");
    }
  }
}

void check_round_trip(const Sentence& example) {
  try {
    validate_sentence(example);
  } catch (const CorpusError& e) {
    throw PromptError(std::string("invalid few-shot example: ") + e.what());
  }
  const auto outcome = parse_response(serialize_markup(example), example.text);
  const auto gold = sorted_spans(example.gold);
  bool ok = outcome.predictions.size() == gold.size() && outcome.invalid_tag_indices.empty();
  for (std::size_t i = 0; ok && i < gold.size(); ++i) {
    const auto& p = outcome.predictions[i];
    ok = p.text == gold[i].text && p.tag == to_tag(gold[i].type) && p.start == gold[i].start &&
         p.end == gold[i].end;
  }
  if (!ok) {
    throw PromptError("few-shot example " + example.key.str() +
                      " does not survive a markup round trip");
  }
}

}  // namespace

std::string_view to_string(PromptVariant variant) {
  return variant == PromptVariant::baseline ? "baseline" : "strict";
}

PromptVariant parse_prompt_variant(std::string_view name) {
  if (name == "baseline") return PromptVariant::baseline;
  if (name == "strict") return PromptVariant::strict;
  throw PromptError("unknown prompt variant '" + std::string(name) + "'");
}

EntityDefinitions EntityDefinitions::from_entries(
    const std::vector<std::pair<std::string, std::string>>& entries) {
  EntityDefinitions defs;
  std::array<bool, kEntityTypeCount> seen{};
  for (const auto& [tag, definition] : entries) {
    const auto type = parse_tag(tag);
    if (!type) throw PromptError("definitions: unknown entity type '" + tag + "'");
    if (seen[index_of(*type)]) throw PromptError("definitions: duplicate entity type '" + tag + "'");
    seen[index_of(*type)] = true;
    defs.text_[index_of(*type)] = definition;
  }
  for (auto type : kAllEntityTypes) {
    if (!seen[index_of(type)]) {
      throw PromptError("definitions: missing definition for entity type '" +
                        std::string(to_tag(type)) + "'");
    }
  }
  return defs;
}

EntityDefinitions EntityDefinitions::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PromptError("cannot read definitions file " + path.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      entries.emplace_back(obj.at("type").get<std::string>(),
                           obj.at("definition").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw PromptError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed definition record: " + e.what());
    }
  }
  return from_entries(entries);
}

std::string EntityDefinitions::render() const {
  std::string out;
  for (auto type : kAllEntityTypes) {
    if (!out.empty()) out += '\n';
    out += "- ";
    out += to_tag(type);
    out += ": ";
    out += text_[index_of(type)];
  }
  return out;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t;
  t.baseline = read_file(dir / "baseline.txt");
  t.strict = read_file(dir / "strict.txt");
  t.task_description = trim_trailing(read_file(dir / "task_description.txt"));
  t.markup_guidelines = trim_trailing(read_file(dir / "markup_guidelines.txt"));
  t.strict_guidelines = trim_trailing(read_file(dir / "strict_guidelines.txt"));
  t.validate();
  return t;
}

void PromptTemplates::validate() const {
  require_placeholders("baseline.txt", baseline,
                       {"task_description", "markup_guidelines", "entity_definitions", "input"});
  require_placeholders("strict.txt", strict,
                       {"task_description", "markup_guidelines", "entity_definitions",
                        "strict_guidelines", "examples", "input"});
  if (baseline.find("{{examples}}") != std::string::npos ||
      baseline.find("{{strict_guidelines}}") != std::string::npos) {
    throw PromptError("baseline.txt: only strict prompts carry examples and strict guidelines");
  }
  for (const auto* body : {&task_description, &markup_guidelines, &strict_guidelines}) {
    if (!placeholders_in(*body).empty()) {
      throw PromptError("section bodies must not contain placeholders");
    }
  }
}

std::string PromptTemplates::digest() const {
  std::string blob;
  for (const auto* part : {&baseline, &strict, &task_description, &markup_guidelines,
                           &strict_guidelines}) {
    blob += *part;
    blob.push_back('\0');
  }
  return sha256_hex(blob);
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size() * 2);
  std::size_t cursor = 0;
  while (cursor < tmpl.size()) {
    const auto open = tmpl.find("{{", cursor);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const auto name = tmpl.substr(open + 2, close - open - 2);
    auto it = values.find(name);
    if (it == values.end()) {
      throw PromptError("no value for placeholder {{" + std::string(name) + "}}");
    }
    out.append(tmpl, cursor, open - cursor);
    out += it->second;
    cursor = close + 2;
  }
  out.append(tmpl, cursor, std::string_view::npos);
  return out;
}

PromptBuilder::PromptBuilder(PromptTemplates templates, EntityDefinitions definitions)
    : templates_(std::move(templates)), definitions_(std::move(definitions)) {
  templates_.validate();
}

std::map<std::string, std::string, std::less<>> PromptBuilder::common_sections() const {
  std::string guidelines = templates_.markup_guidelines;
  guidelines += "\nAllowed tags (no others): ";
  for (std::size_t i = 0; i < kAllEntityTypes.size(); ++i) {
    if (i) guidelines += ", ";
    guidelines += to_tag(kAllEntityTypes[i]);
  }
  return {
      {"task_description", templates_.task_description},
      {"markup_guidelines", guidelines},
      {"entity_definitions", definitions_.render()},
      {"strict_guidelines", templates_.strict_guidelines},
  };
}

std::string PromptBuilder::render_examples(std::span<const Sentence> examples) const {
  if (examples.empty()) return {};
  std::string block = "### Examples\n";
  for (const auto& ex : examples) {
    block += "Input: ";
    block += ex.text;
    block += "\nOutput: ";
    block += serialize_markup(ex);
    block += "\n\n";
  }
  return block;
}

AssembledPrompt PromptBuilder::build_baseline(const Sentence& input) const {
  return build(PromptVariant::baseline, input, {});
}

AssembledPrompt PromptBuilder::build_strict(const Sentence& input,
                                            std::span<const Sentence> examples) const {
  return build(PromptVariant::strict, input, examples);
}

AssembledPrompt PromptBuilder::build(PromptVariant variant, const Sentence& input,
                                     std::span<const Sentence> examples) const {
  if (variant == PromptVariant::baseline && !examples.empty()) {
    throw PromptError("the baseline prompt takes no few-shot examples");
  }
  if (examples.size() > kMaxFewShotExamples) {
    throw PromptError("at most " + std::to_string(kMaxFewShotExamples) +
                      " few-shot examples are supported, got " + std::to_string(examples.size()));
  }
  for (const auto& ex : examples) check_round_trip(ex);

  auto values = common_sections();
  values["input"] = input.text;
  AssembledPrompt prompt;
  if (variant == PromptVariant::baseline) {
    prompt.text = render_template(templates_.baseline, values);
  } else {
    values["examples"] = render_examples(examples);
    prompt.text = render_template(templates_.strict, values);
  }
  prompt.variant = variant;
  for (const auto& ex : examples) prompt.example_keys.push_back(ex.key);
  prompt.input_key = input.key;
  prompt.prompt_hash = sha256_hex(prompt.text);
  prompt.input_length = utf8::length(input.text);
  return prompt;
}

std::string PromptBuilder::digest() const {
  return sha256_hex(templates_.digest() + "\n" + definitions_.render());
}

}  // namespace mer
