#pragma once

// UTF-8 helpers shared by segmentation, keyword extraction and matching.
// Case folding covers Latin, Latin-1, Greek and Cyrillic (Russian and
// Ukrainian letters), which is all the pipeline needs.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hrv::text {

// Decodes the code point starting at `pos` and advances `pos`. Invalid bytes
// decode as U+FFFD and advance by one byte.
char32_t decode(std::string_view s, std::size_t& pos);
void append_utf8(std::string& out, char32_t cp);
std::u32string to_u32(std::string_view s);
std::string to_utf8(std::u32string_view s);

char32_t fold_char(char32_t cp);
std::string casefold(std::string_view s);

bool is_space(char32_t cp);
bool is_digit(char32_t cp);
bool is_upper(char32_t cp);
bool is_lower(char32_t cp);
// Letters, digits and anything not known to be punctuation or a symbol.
bool is_word_char(char32_t cp);

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);

// Whitespace-delimited tokens, punctuation attached.
std::vector<std::string_view> split_whitespace(std::string_view s);
std::size_t count_words(std::string_view s);

// Collapses whitespace runs to one ASCII space, trims, and case folds.
std::string normalize(std::string_view s);

// Runs of word characters. Hyphens and apostrophes are kept when they join
// two word characters ("из-за", "м'ясо").
struct Token {
  std::string text;
  std::size_t offset = 0;  // byte offset in the source
};
std::vector<Token> word_tokens(std::string_view s);

// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view s, char delim);

}  // namespace hrv::text
