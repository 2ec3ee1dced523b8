#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace citeworth {

/// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t char_length(std::string_view text);

/// Number of whitespace-separated words.
std::size_t word_length(std::string_view text);

std::string_view trim(std::string_view text);

/// Collapses every run of ASCII whitespace into a single space and trims.
std::string normalize_space(std::string_view text);

std::string to_lower_ascii(std::string_view text);

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL);

}  // namespace citeworth
