#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mer {

enum class DiagnosticKind { unbalanced_tag, nested_tag, altered_sentence, unanchored_span };

std::string_view to_string(DiagnosticKind kind);

/// A parse or anchoring problem. `position` is a code-point offset into the
/// raw model output.
struct Diagnostic {
  DiagnosticKind kind{};
  std::string excerpt;
  std::int64_t position = 0;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

/// A <tag>...</tag> pair located in clean-text coordinates.
struct TaggedSpan {
  std::string text;
  std::string tag;
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::int64_t raw_position = 0;  // offset of the opening tag in the raw output

  friend bool operator==(const TaggedSpan&, const TaggedSpan&) = default;
};

struct MarkupParse {
  std::string clean_text;
  std::vector<TaggedSpan> spans;
  std::vector<Diagnostic> diagnostics;
};

/// Strips every tag matching <[a-z0-9_]+> or </[a-z0-9_]+> and returns the
/// outermost balanced pairs as spans. Total: never throws on any input.
/// Nested pairs lose their tags (outermost wins); unbalanced tags are
/// dropped. Both leave a diagnostic.
MarkupParse parse_markup(std::string_view raw);

inline constexpr std::int64_t kUnanchored = -1;

/// A model prediction mapped onto the original sentence. Offsets are
/// kUnanchored when the span could not be located.
struct RawPrediction {
  std::string text;
  std::string tag;
  std::int64_t start = kUnanchored;
  std::int64_t end = kUnanchored;

  bool anchored() const noexcept { return start >= 0 && end > start; }

  friend bool operator==(const RawPrediction&, const RawPrediction&) = default;
};

enum class AnchorPath { identity, whitespace_normalized, altered };

std::string_view to_string(AnchorPath path);

struct ParseOutcome {
  std::vector<RawPrediction> predictions;
  /// Indices into `predictions` whose tag is outside the 18-type set.
  std::vector<std::size_t> invalid_tag_indices;
  std::vector<Diagnostic> diagnostics;
  AnchorPath path = AnchorPath::identity;

  std::vector<RawPrediction> invalid_tag_predictions() const;
};

/// Maps spans onto `original`:
///  - identity: clean text equals the original, offsets pass through;
///  - whitespace_normalized: equal after collapsing whitespace runs and
///    trimming, offsets follow the alignment;
///  - altered: each span text is searched in the original and anchored at
///    the occurrence nearest its clean offset, else left unanchored.
ParseOutcome anchor_predictions(const MarkupParse& parsed, std::string_view original);

/// Fills invalid_tag_indices from the closed tag set.
ParseOutcome validate_tags(ParseOutcome outcome);

/// parse_markup, anchor_predictions, and validate_tags in sequence.
ParseOutcome parse_response(std::string_view raw, std::string_view original);

}  // namespace mer
