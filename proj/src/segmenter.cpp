#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "citeworth/corpus.hpp"
#include "citeworth/text_util.hpp"

namespace citeworth::corpus {

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Closing quote sequences that may trail a terminator: ASCII quotes plus
// U+2019 and U+201D.
std::size_t closing_quote_length(std::string_view text, std::size_t i) {
  if (i >= text.size()) return 0;
  if (text[i] == '"' || text[i] == '\'') return 1;
  if (text.substr(i, 3) == "\xE2\x80\x99" || text.substr(i, 3) == "\xE2\x80\x9D") return 3;
  return 0;
}

// The whitespace-delimited token ending at `dot` (inclusive), without
// leading opening punctuation, lowercased.
std::string token_before(std::string_view text, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_space(text[b - 1])) --b;
  while (b < dot && (text[b] == '(' || text[b] == '[' || text[b] == '{' || text[b] == '"' ||
                     text[b] == '\'')) {
    ++b;
  }
  return std::string(text.substr(b, dot - b + 1));
}

void push_trimmed(std::string_view text, std::size_t b, std::size_t e,
                  std::vector<std::pair<std::size_t, std::size_t>>& out) {
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  if (b < e) out.emplace_back(b, e);
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> segment_sentence_ranges(
    std::string_view text, const SegmenterConfig& config) {
  std::unordered_set<std::string> abbreviations;
  for (const auto& a : config.abbreviations) abbreviations.insert(to_lower_ascii(a));

  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t n = text.size();
  std::size_t start = 0;
  int depth = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c == '(' || c == '[') {
      ++depth;
      continue;
    }
    if (c == ')' || c == ']') {
      if (depth > 0) --depth;
      continue;
    }
    if (c != '.' && c != '!' && c != '?') continue;
    if (depth > 0) continue;

    std::size_t j = i + 1;
    for (;;) {
      if (j < n && (text[j] == '.' || text[j] == '!' || text[j] == '?')) {
        ++j;
      } else if (std::size_t q = closing_quote_length(text, j); q > 0) {
        j += q;
      } else {
        break;
      }
    }
    if (j >= n || !is_space(text[j])) continue;
    std::size_t k = j;
    while (k < n && is_space(text[k])) ++k;
    if (k >= n || !(is_upper(text[k]) || is_digit(text[k]))) continue;

    if (c == '.' && j == i + 1) {
      const std::string token = to_lower_ascii(token_before(text, i));
      if (abbreviations.count(token) > 0) continue;
      const std::string raw = token_before(text, i);
      if (config.suppress_single_initials && raw.size() == 2 && is_upper(raw[0])) continue;
    }

    push_trimmed(text, start, j, out);
    start = k;
    i = k - 1;
  }
  push_trimmed(text, start, n, out);
  return out;
}

std::vector<std::string> segment_sentences(std::string_view paragraph_text,
                                           const SegmenterConfig& config) {
  std::vector<std::string> out;
  for (auto [b, e] : segment_sentence_ranges(paragraph_text, config)) {
    out.emplace_back(paragraph_text.substr(b, e - b));
  }
  return out;
}

}  // namespace citeworth::corpus
