#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mer/corpus.hpp"

namespace mer {

enum class PromptVariant { baseline, strict };

std::string_view to_string(PromptVariant variant);
PromptVariant parse_prompt_variant(std::string_view name);

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One definition per entity type, loaded from line-delimited
/// {"type": ..., "definition": ...} records.
class EntityDefinitions {
 public:
  /// Throws PromptError naming the first missing, unknown or duplicated type.
  static EntityDefinitions from_entries(
      const std::vector<std::pair<std::string, std::string>>& entries);
  static EntityDefinitions load(const std::filesystem::path& path);

  const std::string& text(EntityType type) const { return text_[index_of(type)]; }
  /// "- tag: definition" lines in canonical type order.
  std::string render() const;

 private:
  std::array<std::string, kEntityTypeCount> text_;
};

/// Prompt wording, kept in files so each run can pin and digest it.
///
/// A template directory holds baseline.txt and strict.txt (the section
/// skeletons) plus task_description.txt, markup_guidelines.txt and
/// strict_guidelines.txt (section bodies). Skeletons reference sections via
/// {{task_description}}, {{markup_guidelines}}, {{entity_definitions}},
/// {{strict_guidelines}}, {{examples}} and {{input}}.
struct PromptTemplates {
  std::string baseline;
  std::string strict;
  std::string task_description;
  std::string markup_guidelines;
  std::string strict_guidelines;

  static PromptTemplates load(const std::filesystem::path& dir);
  /// Throws PromptError on missing or unknown placeholders.
  void validate() const;
  std::string digest() const;
};

/// Replaces {{name}} placeholders in one left-to-right pass; substituted
/// values are not rescanned. Throws PromptError on unknown names.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& values);

struct AssembledPrompt {
  std::string text;
  PromptVariant variant = PromptVariant::strict;
  std::vector<SentenceKey> example_keys;
  SentenceKey input_key;
  std::string prompt_hash;
  std::size_t input_length = 0;  // code points of the input sentence
};

inline constexpr std::size_t kMaxFewShotExamples = 10;

class PromptBuilder {
 public:
  PromptBuilder(PromptTemplates templates, EntityDefinitions definitions);

  AssembledPrompt build_baseline(const Sentence& input) const;

  /// Examples are rendered in the given order. Each must be a valid
  /// sentence whose markup parses back to its own gold spans.
  AssembledPrompt build_strict(const Sentence& input, std::span<const Sentence> examples) const;

  AssembledPrompt build(PromptVariant variant, const Sentence& input,
                        std::span<const Sentence> examples) const;

  /// The Examples block exactly as spliced into a strict prompt ("" when empty).
  std::string render_examples(std::span<const Sentence> examples) const;

  const PromptTemplates& templates() const noexcept { return templates_; }
  const EntityDefinitions& definitions() const noexcept { return definitions_; }
  /// Digest over templates and definitions.
  std::string digest() const;

 private:
  std::map<std::string, std::string, std::less<>> common_sections() const;

  PromptTemplates templates_;
  EntityDefinitions definitions_;
};

}  // namespace mer
