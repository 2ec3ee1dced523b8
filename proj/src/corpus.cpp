#include "citeworth/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_map>

#include "citeworth/error.hpp"
#include "citeworth/rng.hpp"
#include "citeworth/text_util.hpp"

namespace citeworth::corpus {

namespace {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

struct CleanedSentence {
  std::size_t section_index;
  std::size_t paragraph_index;
  std::size_t ordinal;
  std::string text;
  bool label;
};

std::vector<CleanedSentence> clean_article(const ArticleTree& article) {
  std::vector<CleanedSentence> out;
  std::size_t ordinal = 0;
  for (std::size_t si = 0; si < article.sections.size(); ++si) {
    const auto& section = article.sections[si];
    for (std::size_t pi = 0; pi < section.paragraphs.size(); ++pi) {
      for (const auto& raw : section.paragraphs[pi].sentences) {
        // Hints first, then noise cleanup.
        out.push_back({si, pi, ordinal++, clean_sentence(strip_citation_hints(raw.text)),
                       raw.has_citation});
      }
    }
  }
  return out;
}

std::vector<LabeledSentence> to_labeled(const ArticleTree& article,
                                        const std::vector<CleanedSentence>& cleaned,
                                        const LengthBounds& bounds, NeighborScope scope) {
  std::vector<LabeledSentence> out;
  for (const auto& c : cleaned) {
    LabeledSentence s;
    s.char_len = char_length(c.text);
    s.word_len = word_length(c.text);
    if (!within_bounds(s.char_len, s.word_len, bounds)) continue;
    s.id = article.article_id + "#" + std::to_string(c.ordinal);
    s.article_id = article.article_id;
    s.section_index = c.section_index;
    s.paragraph_index = c.paragraph_index;
    s.text = c.text;
    s.label = c.label;
    s.section_type = article.sections[c.section_index].section_type;
    out.push_back(std::move(s));
  }
  link_neighbors(out, scope);
  return out;
}

}  // namespace

bool within_bounds(std::size_t char_len, std::size_t word_len, const LengthBounds& bounds) {
  const auto c = static_cast<double>(char_len);
  const auto w = static_cast<double>(word_len);
  return c >= bounds.char_low && c <= bounds.char_high && w >= bounds.word_low &&
         w <= bounds.word_high;
}

LengthBounds quantile_bounds(const std::vector<std::string>& sentences, double low_q,
                             double high_q) {
  std::vector<double> chars, words;
  chars.reserve(sentences.size());
  words.reserve(sentences.size());
  for (const auto& s : sentences) {
    chars.push_back(static_cast<double>(char_length(s)));
    words.push_back(static_cast<double>(word_length(s)));
  }
  return {quantile(chars, low_q), quantile(chars, high_q), quantile(words, low_q),
          quantile(words, high_q)};
}

std::vector<std::string> filter_outliers(const std::vector<std::string>& sentences,
                                         const FilterConfig& config) {
  const LengthBounds bounds =
      config.data_driven
          ? quantile_bounds(sentences, config.low_quantile, config.high_quantile)
          : config.bounds;
  if (!(bounds.char_low > 0 && bounds.word_low > 0 && bounds.char_low < bounds.char_high &&
        bounds.word_low < bounds.word_high) &&
      !config.data_driven) {
    throw Error(ErrorCode::InvalidArgument, "length bounds must be positive with low < high");
  }
  std::vector<std::string> out;
  for (const auto& s : sentences) {
    if (within_bounds(char_length(s), word_length(s), bounds)) out.push_back(s);
  }
  return out;
}

void link_neighbors(std::vector<LabeledSentence>& sentences, NeighborScope scope) {
  auto same_scope = [scope](const LabeledSentence& a, const LabeledSentence& b) {
    if (a.article_id != b.article_id) return false;
    switch (scope) {
      case NeighborScope::Paragraph:
        return a.section_index == b.section_index && a.paragraph_index == b.paragraph_index;
      case NeighborScope::Section:
        return a.section_index == b.section_index;
      case NeighborScope::Document:
        return true;
    }
    return false;
  };
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto& s = sentences[i];
    s.prev_id.reset();
    s.next_id.reset();
    s.prev_has_citation = false;
    s.next_has_citation = false;
    if (i > 0 && same_scope(sentences[i - 1], s)) {
      s.prev_id = sentences[i - 1].id;
      s.prev_has_citation = sentences[i - 1].label;
    }
    if (i + 1 < sentences.size() && same_scope(sentences[i + 1], s)) {
      s.next_id = sentences[i + 1].id;
      s.next_has_citation = sentences[i + 1].label;
    }
  }
}

std::vector<LabeledSentence> label_article(const ArticleTree& article, const LengthBounds& bounds,
                                           NeighborScope scope) {
  return to_labeled(article, clean_article(article), bounds, scope);
}

CorpusSplit build_dataset(const std::vector<ArticleTree>& articles, const BuildConfig& config) {
  const auto& f = config.fractions;
  if (f[0] <= 0 || f[1] < 0 || f[2] < 0 || std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "split fractions must be non-negative and sum to 1");
  }
  if (articles.size() < 3) {
    throw Error(ErrorCode::InsufficientData,
                "need at least 3 articles, got " + std::to_string(articles.size()));
  }

  // Article ids must be unique for sentence ids to be.
  std::vector<ArticleTree> unique_articles = articles;
  std::unordered_map<std::string, int> seen;
  for (auto& a : unique_articles) {
    const int n = seen[a.article_id]++;
    if (n > 0) a.article_id += "~" + std::to_string(n);
  }

  std::vector<std::vector<CleanedSentence>> cleaned;
  cleaned.reserve(unique_articles.size());
  for (const auto& a : unique_articles) cleaned.push_back(clean_article(a));

  LengthBounds bounds = config.filter.bounds;
  if (config.filter.data_driven) {
    std::vector<std::string> all;
    for (const auto& c : cleaned)
      for (const auto& s : c) all.push_back(s.text);
    bounds = quantile_bounds(all, config.filter.low_quantile, config.filter.high_quantile);
  }

  std::vector<std::vector<LabeledSentence>> per_article;
  per_article.reserve(unique_articles.size());
  for (std::size_t i = 0; i < unique_articles.size(); ++i) {
    per_article.push_back(to_labeled(unique_articles[i], cleaned[i], bounds,
                                     config.neighbor_scope));
  }

  std::vector<std::size_t> order(unique_articles.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(config.seed);
  rng.shuffle(order);

  const auto n = static_cast<long>(order.size());
  long counts[3] = {std::lround(f[0] * static_cast<double>(n)),
                    std::lround(f[1] * static_cast<double>(n)), 0};
  counts[0] = std::min(counts[0], n);
  counts[1] = std::min(counts[1], n - counts[0]);
  counts[2] = n - counts[0] - counts[1];
  // Every split with a positive fraction gets at least one article.
  for (int k = 0; k < 3; ++k) {
    if (f[static_cast<std::size_t>(k)] > 0 && counts[k] == 0) {
      int donor = static_cast<int>(std::max_element(counts, counts + 3) - counts);
      --counts[donor];
      ++counts[k];
    }
  }

  CorpusSplit split;
  split.split_fractions = f;
  split.seed = config.seed;
  std::vector<LabeledSentence>* targets[3] = {&split.train, &split.validation, &split.test};
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    for (long c = 0; c < counts[k]; ++c, ++pos) {
      auto& src = per_article[order[pos]];
      targets[k]->insert(targets[k]->end(), src.begin(), src.end());
    }
  }
  return split;
}

StatsTable corpus_stats(const std::vector<LabeledSentence>& sentences) {
  StatsTable t;
  std::set<std::string> articles;
  std::set<std::tuple<std::string, std::size_t>> sections;
  std::set<std::tuple<std::string, std::size_t, std::size_t>> paragraphs;
  double chars = 0, words = 0;
  for (const auto& s : sentences) {
    articles.insert(s.article_id);
    sections.emplace(s.article_id, s.section_index);
    paragraphs.emplace(s.article_id, s.section_index, s.paragraph_index);
    (s.label ? t.citing : t.non_citing)++;
    chars += static_cast<double>(s.char_len);
    words += static_cast<double>(s.word_len);
  }
  t.articles = articles.size();
  t.sections = sections.size();
  t.paragraphs = paragraphs.size();
  t.sentences = sentences.size();
  if (t.sentences > 0) {
    t.avg_chars = chars / static_cast<double>(t.sentences);
    t.avg_words = words / static_cast<double>(t.sentences);
  }
  if (t.citing > 0) t.ratio = static_cast<double>(t.non_citing) / static_cast<double>(t.citing);
  return t;
}

StatsTable corpus_stats(const CorpusSplit& split) {
  std::vector<LabeledSentence> all;
  all.reserve(split.train.size() + split.validation.size() + split.test.size());
  all.insert(all.end(), split.train.begin(), split.train.end());
  all.insert(all.end(), split.validation.begin(), split.validation.end());
  all.insert(all.end(), split.test.begin(), split.test.end());
  return corpus_stats(all);
}

StatsTable corpus_stats(const std::vector<ArticleTree>& articles) {
  StatsTable t;
  double chars = 0, words = 0;
  t.articles = articles.size();
  for (const auto& a : articles) {
    t.sections += a.sections.size();
    for (const auto& s : a.sections) {
      t.paragraphs += s.paragraphs.size();
      for (const auto& p : s.paragraphs) {
        for (const auto& r : p.sentences) {
          ++t.sentences;
          (r.has_citation ? t.citing : t.non_citing)++;
          chars += static_cast<double>(char_length(r.text));
          words += static_cast<double>(word_length(r.text));
        }
      }
    }
  }
  if (t.sentences > 0) {
    t.avg_chars = chars / static_cast<double>(t.sentences);
    t.avg_words = words / static_cast<double>(t.sentences);
  }
  if (t.citing > 0) t.ratio = static_cast<double>(t.non_citing) / static_cast<double>(t.citing);
  return t;
}

}  // namespace citeworth::corpus
