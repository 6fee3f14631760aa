#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by every module. Offsets are byte offsets unless a
// function name says otherwise.
namespace forpkg::text {

// Decodes one code point starting at `pos`; advances `pos`. Invalid bytes
// decode as U+FFFD and consume a single byte.
char32_t next_code_point(std::string_view s, std::size_t& pos);

std::vector<char32_t> code_points(std::string_view s);
std::size_t code_point_count(std::string_view s);
std::string encode(char32_t cp);

// Byte offset of the end of the first `n` code points (clamped to size).
std::size_t byte_offset_of(std::string_view s, std::size_t n_code_points);

bool is_space(char32_t cp);        // ASCII, Latin-1 and CJK whitespace
bool is_punctuation(char32_t cp);  // ASCII and CJK punctuation

// Trims ASCII and CJK whitespace from both ends.
std::string_view trim(std::string_view s);

// Removes every whitespace and punctuation code point.
std::string strip_space_and_punct(std::string_view s);

// All non-overlapping occurrences of `needle`, left to right.
std::vector<std::size_t> find_all(std::string_view haystack,
                                  std::string_view needle);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace forpkg::text
