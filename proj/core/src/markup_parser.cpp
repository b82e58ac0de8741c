#include "mer/markup_parser.hpp"

#include <algorithm>
#include <cstdlib>
#include <optional>

#include "mer/entity_type.hpp"
#include "mer/utf8.hpp"

namespace mer {

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::unbalanced_tag: return "unbalanced_tag";
    case DiagnosticKind::nested_tag: return "nested_tag";
    case DiagnosticKind::altered_sentence: return "altered_sentence";
    case DiagnosticKind::unanchored_span: return "unanchored_span";
  }
  return "unknown";
}

std::string_view to_string(AnchorPath path) {
  switch (path) {
    case AnchorPath::identity: return "identity";
    case AnchorPath::whitespace_normalized: return "whitespace_normalized";
    case AnchorPath::altered: return "altered";
  }
  return "unknown";
}

std::vector<RawPrediction> ParseOutcome::invalid_tag_predictions() const {
  std::vector<RawPrediction> out;
  out.reserve(invalid_tag_indices.size());
  for (auto i : invalid_tag_indices) out.push_back(predictions[i]);
  return out;
}

namespace {

struct TagToken {
  std::size_t pos = 0;  // offset in the scanned text
  std::size_t len = 0;
  bool closing = false;
  std::u32string name;
};

bool is_tag_char(char32_t c) {
  return (c >= U'a' && c <= U'z') || (c >= U'0' && c <= U'9') || c == U'_';
}

std::optional<TagToken> match_tag(std::u32string_view text, std::size_t pos) {
  if (text[pos] != U'<') return std::nullopt;
  std::size_t i = pos + 1;
  TagToken tok;
  tok.pos = pos;
  if (i < text.size() && text[i] == U'/') {
    tok.closing = true;
    ++i;
  }
  const auto name_start = i;
  while (i < text.size() && is_tag_char(text[i])) ++i;
  if (i == name_start || i >= text.size() || text[i] != U'>') return std::nullopt;
  tok.name = std::u32string(text.substr(name_start, i - name_start));
  tok.len = i + 1 - pos;
  return tok;
}

std::vector<TagToken> tokenize(std::u32string_view text) {
  std::vector<TagToken> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (auto tok = match_tag(text, i)) {
      i += tok->len;
      tokens.push_back(std::move(*tok));
    } else {
      ++i;
    }
  }
  return tokens;
}

// Text with tag tokens removed; origin[i] is the raw offset of clean char i.
struct Stripped {
  std::u32string text;
  std::vector<std::size_t> origin;
  std::vector<std::size_t> clean_pos;  // per token: clean offset where it stood
};

Stripped strip(std::u32string_view text, const std::vector<std::size_t>& origin,
               const std::vector<TagToken>& tokens) {
  Stripped out;
  out.text.reserve(text.size());
  out.origin.reserve(text.size());
  std::size_t cursor = 0;
  for (const auto& tok : tokens) {
    for (; cursor < tok.pos; ++cursor) {
      out.text.push_back(text[cursor]);
      out.origin.push_back(origin[cursor]);
    }
    out.clean_pos.push_back(out.text.size());
    cursor = tok.pos + tok.len;
  }
  for (; cursor < text.size(); ++cursor) {
    out.text.push_back(text[cursor]);
    out.origin.push_back(origin[cursor]);
  }
  return out;
}

struct Pair {
  std::size_t open = 0;
  std::size_t close = 0;
};

std::string excerpt_of(const TagToken& tok) {
  std::u32string s = U"<";
  if (tok.closing) s += U'/';
  s += tok.name;
  s += U'>';
  return utf8::encode(s);
}

}  // namespace

MarkupParse parse_markup(std::string_view raw) {
  const auto text = utf8::decode(raw);
  std::vector<std::size_t> origin(text.size());
  for (std::size_t i = 0; i < origin.size(); ++i) origin[i] = i;

  MarkupParse result;
  const auto tokens = tokenize(text);

  std::vector<Pair> pairs;
  std::vector<std::size_t> stack;
  auto unbalanced = [&](std::size_t t) {
    result.diagnostics.push_back({DiagnosticKind::unbalanced_tag, excerpt_of(tokens[t]),
                                  static_cast<std::int64_t>(tokens[t].pos)});
  };
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (!tokens[t].closing) {
      stack.push_back(t);
      continue;
    }
    auto it = std::find_if(stack.rbegin(), stack.rend(),
                           [&](std::size_t o) { return tokens[o].name == tokens[t].name; });
    if (it == stack.rend()) {
      unbalanced(t);
      continue;
    }
    const auto depth = static_cast<std::size_t>(std::distance(stack.rbegin(), it));
    for (std::size_t d = 0; d < depth; ++d) {
      unbalanced(stack.back());
      stack.pop_back();
    }
    pairs.push_back({stack.back(), t});
    stack.pop_back();
  }
  for (auto o : stack) unbalanced(o);

  auto stripped = strip(text, origin, tokens);

  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.open < b.open; });
  std::optional<std::size_t> outer_close;
  for (const auto& p : pairs) {
    if (outer_close && p.open < *outer_close) {
      result.diagnostics.push_back({DiagnosticKind::nested_tag, excerpt_of(tokens[p.open]),
                                    static_cast<std::int64_t>(tokens[p.open].pos)});
      continue;
    }
    outer_close = p.close;
    TaggedSpan span;
    span.tag = utf8::encode(tokens[p.open].name);
    span.start = static_cast<std::int64_t>(stripped.clean_pos[p.open]);
    span.end = static_cast<std::int64_t>(stripped.clean_pos[p.close]);
    span.raw_position = static_cast<std::int64_t>(tokens[p.open].pos);
    result.spans.push_back(std::move(span));
  }

  // Removing a tag can splice a new tag-shaped run together, e.g.
  // "<<x>a>" -> "<a>". Strip those too until none remain.
  for (auto again = tokenize(stripped.text); !again.empty(); again = tokenize(stripped.text)) {
    std::vector<std::size_t> removed_before(stripped.text.size() + 1, 0);
    {
      std::size_t removed = 0;
      std::size_t next = 0;
      for (std::size_t i = 0; i <= stripped.text.size(); ++i) {
        removed_before[i] = removed;
        if (next < again.size() && i >= again[next].pos && i < again[next].pos + again[next].len) {
          ++removed;
          if (i + 1 == again[next].pos + again[next].len) ++next;
        }
      }
    }
    for (const auto& tok : again) {
      result.diagnostics.push_back({DiagnosticKind::unbalanced_tag, excerpt_of(tok),
                                    static_cast<std::int64_t>(stripped.origin[tok.pos])});
    }
    for (auto& span : result.spans) {
      span.start -= static_cast<std::int64_t>(removed_before[static_cast<std::size_t>(span.start)]);
      span.end -= static_cast<std::int64_t>(removed_before[static_cast<std::size_t>(span.end)]);
    }
    stripped = strip(stripped.text, stripped.origin, again);
  }

  for (auto& span : result.spans) {
    span.text = utf8::slice(stripped.text, static_cast<std::size_t>(span.start),
                            static_cast<std::size_t>(span.end));
  }
  std::stable_sort(result.diagnostics.begin(), result.diagnostics.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.position < b.position; });
  result.clean_text = utf8::encode(stripped.text);
  return result;
}

namespace {

// For each non-space char of `text`, its index in the normalized form;
// whitespace maps to npos.
std::vector<std::size_t> normalized_index(std::u32string_view text) {
  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> idx(text.size(), npos);
  std::size_t n = 0;
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (utf8::is_space(text[i])) {
      pending_space = n > 0;
      continue;
    }
    if (pending_space) ++n;
    pending_space = false;
    idx[i] = n++;
  }
  return idx;
}

void unanchor(ParseOutcome& out, const TaggedSpan& span) {
  out.predictions.push_back({span.text, span.tag, kUnanchored, kUnanchored});
  out.diagnostics.push_back({DiagnosticKind::unanchored_span, span.text, span.raw_position});
}

}  // namespace

ParseOutcome anchor_predictions(const MarkupParse& parsed, std::string_view original) {
  ParseOutcome out;
  out.diagnostics = parsed.diagnostics;
  const auto clean = utf8::decode(parsed.clean_text);
  const auto orig = utf8::decode(original);

  if (clean == orig) {
    out.path = AnchorPath::identity;
    for (const auto& span : parsed.spans) {
      if (span.start >= span.end) {
        unanchor(out, span);
        continue;
      }
      out.predictions.push_back({span.text, span.tag, span.start, span.end});
    }
    return out;
  }

  if (utf8::normalize_whitespace(clean) == utf8::normalize_whitespace(orig)) {
    out.path = AnchorPath::whitespace_normalized;
    constexpr auto npos = static_cast<std::size_t>(-1);
    const auto clean_idx = normalized_index(clean);
    const auto orig_idx = normalized_index(orig);
    std::vector<std::size_t> orig_of_norm;
    for (std::size_t i = 0; i < orig.size(); ++i) {
      if (orig_idx[i] == npos) continue;
      orig_of_norm.resize(orig_idx[i] + 1, npos);
      orig_of_norm[orig_idx[i]] = i;
    }
    for (const auto& span : parsed.spans) {
      auto s = static_cast<std::size_t>(span.start);
      auto e = static_cast<std::size_t>(span.end);
      while (s < e && clean_idx[s] == npos) ++s;
      while (e > s && clean_idx[e - 1] == npos) --e;
      if (s >= e) {
        unanchor(out, span);
        continue;
      }
      const auto start = orig_of_norm[clean_idx[s]];
      const auto end = orig_of_norm[clean_idx[e - 1]] + 1;
      out.predictions.push_back({utf8::slice(orig, start, end), span.tag,
                                 static_cast<std::int64_t>(start),
                                 static_cast<std::int64_t>(end)});
    }
    return out;
  }

  out.path = AnchorPath::altered;
  out.diagnostics.push_back({DiagnosticKind::altered_sentence, parsed.clean_text, 0});
  for (const auto& span : parsed.spans) {
    const auto needle = utf8::decode(span.text);
    if (needle.empty()) {
      unanchor(out, span);
      continue;
    }
    std::optional<std::size_t> best;
    for (auto pos = orig.find(needle); pos != std::u32string::npos;
         pos = orig.find(needle, pos + 1)) {
      const auto dist = std::llabs(static_cast<long long>(pos) - span.start);
      if (!best || dist < std::llabs(static_cast<long long>(*best) - span.start)) best = pos;
    }
    if (!best) {
      unanchor(out, span);
      continue;
    }
    out.predictions.push_back({span.text, span.tag, static_cast<std::int64_t>(*best),
                               static_cast<std::int64_t>(*best + needle.size())});
  }
  return out;
}

ParseOutcome validate_tags(ParseOutcome outcome) {
  outcome.invalid_tag_indices.clear();
  for (std::size_t i = 0; i < outcome.predictions.size(); ++i) {
    if (!parse_tag(outcome.predictions[i].tag)) outcome.invalid_tag_indices.push_back(i);
  }
  return outcome;
}

ParseOutcome parse_response(std::string_view raw, std::string_view original) {
  return validate_tags(anchor_predictions(parse_markup(raw), original));
}

}  // namespace mer
