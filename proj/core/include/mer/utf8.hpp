#pragma once

#include <cstddef>
#include <string>
#include <string_view>

// All span offsets in the harness count Unicode code points, not bytes.
// These helpers convert between UTF-8 storage and code-point sequences.
namespace mer::utf8 {

/// Decodes UTF-8; malformed sequences decode to U+FFFD one byte at a time.
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view text);

/// True iff `bytes` is well-formed UTF-8 (no overlongs, no surrogates).
bool is_valid(std::string_view bytes);

/// Number of code points in well-formed UTF-8.
std::size_t length(std::string_view bytes);

/// Code-point slice [start, end) re-encoded as UTF-8.
std::string slice(std::u32string_view text, std::size_t start, std::size_t end);

/// Unicode White_Space plus U+001C..U+001F (the separators str.split() uses).
bool is_space(char32_t c);

/// Number of maximal non-whitespace runs.
std::size_t count_words(std::u32string_view text);

/// Collapses whitespace runs to one U+0020 and trims both ends.
std::u32string normalize_whitespace(std::u32string_view text);

}  // namespace mer::utf8
