#pragma once

// Corpus compilation: JATS-XML articles -> labeled, cleaned sentences with
// neighbor links, split by article into train/validation/test.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace citeworth::corpus {

struct CitationSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  bool operator==(const CitationSpan&) const = default;
};

struct RawSentence {
  std::string text;
  std::vector<CitationSpan> citation_spans;
  bool has_citation = false;
};

struct Paragraph {
  std::vector<RawSentence> sentences;
};

struct Section {
  std::string section_type;
  std::string title;
  std::vector<Paragraph> paragraphs;
};

struct ArticleTree {
  std::string article_id;
  std::vector<Section> sections;
};

struct LabeledSentence {
  std::string id;  // "<article_id>#<ordinal>"
  std::string article_id;
  std::size_t section_index = 0;
  std::size_t paragraph_index = 0;
  std::string text;
  bool label = false;  // citing
  std::string section_type;
  std::size_t char_len = 0;
  std::size_t word_len = 0;
  std::optional<std::string> prev_id;
  std::optional<std::string> next_id;
  bool prev_has_citation = false;
  bool next_has_citation = false;
};

struct CorpusSplit {
  std::vector<LabeledSentence> train;
  std::vector<LabeledSentence> validation;
  std::vector<LabeledSentence> test;
  std::array<double, 3> split_fractions{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Parsing

/// Parses one JATS article. `fallback_id` is used when the document carries
/// no <article-id>. Throws Error{MalformedXml} or Error{EmptyArticle}.
ArticleTree parse_article(std::string_view xml_bytes, std::string_view fallback_id = {});

/// Reads a .xml / .nxml file, transparently inflating gzip input.
std::string read_maybe_gzip(const std::filesystem::path& path);

/// All article files (.xml, .nxml, optionally .gz) under `dir`, sorted by path.
std::vector<std::filesystem::path> list_article_files(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Sentence segmentation

struct SegmenterConfig {
  std::vector<std::string> abbreviations = {
      "al.", "fig.", "figs.", "e.g.", "i.e.", "vs.", "cf.", "eq.", "eqs.", "ref.",
      "refs.", "no.", "nos.", "approx.", "ca.", "dr.", "mr.", "mrs.", "ms.", "prof.",
      "st.", "tab.", "vol.", "pp.", "p.", "sp.", "spp.", "resp.", "suppl.", "var.",
      "subsp.", "chap.", "sect.", "jr.", "sr.", "inc.", "ltd.", "co.", "corp.", "viz."};
  // Treat a lone capital letter before the period ("J. Smith") as an initial.
  // Off by default: it also swallows real boundaries such as "vitamin C. The".
  bool suppress_single_initials = false;
};

/// Byte ranges [begin, end) of each sentence in `text`, trimmed of whitespace.
std::vector<std::pair<std::size_t, std::size_t>> segment_sentence_ranges(
    std::string_view text, const SegmenterConfig& config = {});

std::vector<std::string> segment_sentences(std::string_view paragraph_text,
                                           const SegmenterConfig& config = {});

// ---------------------------------------------------------------------------
// Citation hints and noise

/// Deletes every match of the three hint patterns until a fixed point is
/// reached, so the operation is idempotent.
std::string strip_citation_hints(std::string_view text);

/// Byte spans of hint-pattern matches in `text` (used for labeling).
std::vector<CitationSpan> find_citation_hints(std::string_view text);

/// Trim, drop leading digits/punctuation, drop trailing digits.
std::string clean_sentence(std::string_view text);

// ---------------------------------------------------------------------------
// Outlier filtering

struct LengthBounds {
  double char_low = 19;
  double char_high = 275;
  double word_low = 3;
  double word_high = 42;
};

struct FilterConfig {
  LengthBounds bounds{};
  // Recompute bounds as empirical 5%/95% quantiles of the input.
  bool data_driven = false;
  double low_quantile = 0.05;
  double high_quantile = 0.95;
};

bool within_bounds(std::size_t char_len, std::size_t word_len, const LengthBounds& bounds);

/// Quantile bounds of the given sentences (linear interpolation between
/// order statistics).
LengthBounds quantile_bounds(const std::vector<std::string>& sentences, double low_q,
                             double high_q);

std::vector<std::string> filter_outliers(const std::vector<std::string>& sentences,
                                         const FilterConfig& config = {});

// ---------------------------------------------------------------------------
// Dataset assembly

enum class NeighborScope { Paragraph, Section, Document };

struct BuildConfig {
  std::array<double, 3> fractions{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;
  FilterConfig filter{};
  NeighborScope neighbor_scope = NeighborScope::Document;
};

/// Labels, strips, cleans and filters every sentence, links neighbors within
/// each article, then shuffles whole articles into the three splits.
/// Throws Error{InsufficientData} for fewer than 3 articles and
/// Error{InvalidArgument} for bad fractions.
CorpusSplit build_dataset(const std::vector<ArticleTree>& articles, const BuildConfig& config = {});

/// The per-article sentence list (before splitting): labeled, hint-stripped,
/// cleaned, filtered by `bounds`, and linked.
std::vector<LabeledSentence> label_article(const ArticleTree& article, const LengthBounds& bounds,
                                           NeighborScope scope);

/// Recomputes prev/next ids and neighbor flags over `sentences`, which must
/// all belong to one document and be in reading order.
void link_neighbors(std::vector<LabeledSentence>& sentences, NeighborScope scope);

// ---------------------------------------------------------------------------
// Statistics

struct StatsTable {
  std::size_t articles = 0;
  std::size_t sections = 0;
  std::size_t paragraphs = 0;
  std::size_t sentences = 0;
  std::size_t non_citing = 0;
  std::size_t citing = 0;
  double avg_chars = 0.0;
  double avg_words = 0.0;
  double ratio = 0.0;  // non_citing / citing, 0 when there are no citing sentences
};

StatsTable corpus_stats(const std::vector<LabeledSentence>& sentences);
StatsTable corpus_stats(const CorpusSplit& split);
StatsTable corpus_stats(const std::vector<ArticleTree>& articles);

}  // namespace citeworth::corpus
