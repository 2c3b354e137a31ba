#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the modules. All case mapping is ASCII-only;
// bytes outside ASCII pass through unchanged.
namespace k2q::text {

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD one byte at
/// a time, so every input has a decoding.
std::u32string decode_utf8(std::string_view s);

std::size_t codepoint_length(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string_view trim(std::string_view s);

std::string to_lower(std::string_view s);

/// Lowercases, trims and collapses every whitespace run to one space.
std::string normalize_spaces_lower(std::string_view s);

std::string remove_whitespace(std::string_view s);

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_alpha(char c) { return is_upper(c) || is_lower(c); }
inline bool is_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
         (c >= '{' && c <= '~');
}

}  // namespace k2q::text
