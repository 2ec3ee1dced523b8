#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include <boost/regex.hpp>

#include "citeworth/corpus.hpp"
#include "citeworth/text_util.hpp"

namespace citeworth::corpus {

namespace {

// Hint patterns, applied in this order. Byte-oriented over UTF-8: the en/em
// dash and the no-break space are spelled out as their byte sequences.
//
// 1. Numeric reference lists in brackets or parentheses ("[1, 2]", "(1-3)").
//    Adjacent groups joined by commas or semicolons ("[8],[9],[12]") are
//    consumed as one match. Never at the very start of the text.
// 2. Parenthetical author-year / "et al." citations.
// 3. A bare "et al." with an optional following year.
const boost::regex& numeric_pattern() {
  static const boost::regex re(
      R"((?!\A)(?:[\[(]\s*(?:\d(?:[\s,;\-]|\xE2\x80[\x93\x94])*)*\d\s*[\])])(?:\s*[,;]\s*[\[(]\s*(?:\d(?:[\s,;\-]|\xE2\x80[\x93\x94])*)*\d\s*[\])])*)",
      boost::regex::perl);
  return re;
}

const boost::regex& author_year_pattern() {
  static const boost::regex re(
      R"([(\[]\s*(?:[^()\[\]]*(?:(?:(?:16|17|18|19|20)\d{2}(?!\d))|(?:et(?:[.\s]|\xC2\xA0)*al\.))[^()]*)?[)\]])",
      boost::regex::perl);
  return re;
}

const boost::regex& et_al_pattern() {
  static const boost::regex re(
      R"(\bet(?:[.\s]|\xC2\xA0)+al(?![A-Za-z])[.\s(\[]*(?:(?:16|17|18|19|20)\d{2})*[)\]\s]*(?!\d))",
      boost::regex::perl);
  return re;
}

const boost::regex* const kPatterns[] = {&numeric_pattern(), &author_year_pattern(),
                                         &et_al_pattern()};

}  // namespace

std::string strip_citation_hints(std::string_view text) {
  std::string current(text);
  for (;;) {
    std::string next = current;
    for (const boost::regex* re : kPatterns) {
      next = boost::regex_replace(next, *re, "", boost::format_all);
    }
    if (next == current) return current;
    current = std::move(next);
  }
}

std::vector<CitationSpan> find_citation_hints(std::string_view text) {
  std::vector<CitationSpan> spans;
  for (const boost::regex* re : kPatterns) {
    boost::cregex_iterator it(text.data(), text.data() + text.size(), *re);
    for (boost::cregex_iterator end; it != end; ++it) {
      const auto& m = *it;
      if (m.length(std::size_t{0}) == 0) continue;
      const auto start = static_cast<std::size_t>(m.position(std::size_t{0}));
      spans.push_back({start, start + static_cast<std::size_t>(m.length(std::size_t{0}))});
    }
  }
  std::sort(spans.begin(), spans.end(),
            [](const CitationSpan& a, const CitationSpan& b) { return a.start < b.start; });
  std::vector<CitationSpan> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.start < merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

std::string clean_sentence(std::string_view text) {
  auto is_ascii_punct = [](unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
           (c >= 123 && c <= 126);
  };
  auto is_digit = [](unsigned char c) { return c >= '0' && c <= '9'; };

  std::string_view s = trim(text);
  std::size_t b = 0;
  while (b < s.size()) {
    const auto c = static_cast<unsigned char>(s[b]);
    if (is_digit(c) || is_ascii_punct(c) || is_space(static_cast<char>(c))) {
      ++b;
    } else {
      break;
    }
  }
  s = s.substr(b);
  std::size_t e = s.size();
  while (e > 0) {
    const auto c = static_cast<unsigned char>(s[e - 1]);
    if (is_digit(c) || is_space(static_cast<char>(c))) {
      --e;
    } else {
      break;
    }
  }
  return std::string(s.substr(0, e));
}

}  // namespace citeworth::corpus
