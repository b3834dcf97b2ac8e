#pragma once

// UTF-8 and Unicode helpers shared by the pipeline, tokenizer and analysis code.
// Character classes follow the BERT basic tokenizer conventions.

#include <string>
#include <string_view>
#include <vector>

namespace sebench::text {

// Decodes UTF-8; invalid sequences become U+FFFD.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

// Full Unicode lowercase mapping (root locale).
std::string to_lower(std::string_view utf8);

// NFD followed by removal of nonspacing marks.
std::string strip_accents(std::string_view utf8);

bool is_whitespace(char32_t cp);
// Cc/Cf other than tab, newline and carriage return.
bool is_control(char32_t cp);
// ASCII symbol ranges plus every Unicode P* category.
bool is_punctuation(char32_t cp);
// Letters and numbers (L* and N*).
bool is_alnum(char32_t cp);
bool is_cjk(char32_t cp);
// True when lowercasing maps the character to something else.
bool has_lowercase_mapping(char32_t cp);

// True if any character would change under lowercasing, ignoring the
// [HASH]/[CODE]/[USER] sentinels.
bool contains_uppercase(std::string_view utf8);
// True if any code point is a C0/C1 control (tab, newline and CR included).
bool contains_control(std::string_view utf8);

// Collapses whitespace runs to one ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view utf8);
std::string_view trim(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

inline constexpr std::string_view kHashToken = "[HASH]";
inline constexpr std::string_view kCodeToken = "[CODE]";
inline constexpr std::string_view kUserToken = "[USER]";

bool is_sentinel(std::string_view token);

// ASCII-only helpers for markup handling.
inline bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }
bool iequals_prefix(std::string_view s, std::size_t pos, std::string_view prefix);

}  // namespace sebench::text
