#pragma once

// Text representations: tf-idf over uni/bi-grams, LDA topic mixtures, and
// pre-trained token vectors.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace citeworth::textrep {

inline constexpr std::string_view kNumberToken = "<num>";

/// Lowercases, splits on non-alphanumeric boundaries (bytes >= 0x80 count as
/// word characters) and folds numbers such as "0.05" or "1,000" to "<num>".
std::vector<std::string> tokenize(std::string_view text);

/// Unigrams followed by adjacent bigrams joined with '_'.
std::vector<std::string> ngrams(const std::vector<std::string>& tokens, int max_n = 2);

// ---------------------------------------------------------------------------
// Vocabulary / tf-idf

struct SparseVector {
  std::vector<std::uint32_t> indices;  // strictly increasing
  std::vector<double> values;
  std::size_t dimension = 0;

  std::size_t nnz() const { return indices.size(); }
  double norm() const;
};

class Vocabulary {
 public:
  Vocabulary() = default;

  std::optional<std::uint32_t> index_of(std::string_view term) const;
  const std::string& term(std::uint32_t index) const { return terms_[index]; }
  std::size_t document_frequency(std::uint32_t index) const { return df_[index]; }
  std::size_t size() const { return terms_.size(); }
  std::size_t document_count() const { return document_count_; }
  std::size_t min_df() const { return min_df_; }
  int max_ngram() const { return max_ngram_; }
  const std::vector<std::string>& terms() const { return terms_; }

  /// ln((1+N)/(1+df)) + 1
  double idf(std::uint32_t index) const;

  /// Hash of the ordered term list; stored in model files to detect drift.
  std::uint64_t hash() const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend Vocabulary fit_vocab(const std::vector<std::vector<std::string>>&, int, std::size_t);

 private:
  std::vector<std::string> terms_;  // sorted
  std::vector<std::size_t> df_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::size_t document_count_ = 0;
  std::size_t min_df_ = 1;
  int max_ngram_ = 2;

  void rebuild_index();
};

/// Fits over tokenized documents. Terms are sorted lexicographically so the
/// result does not depend on document order. Throws Error{EmptyVocabulary}.
Vocabulary fit_vocab(const std::vector<std::vector<std::string>>& corpus, int max_ngram = 2,
                     std::size_t min_df = 5);

/// Raw-count tf times smoothed idf, L2-normalized; OOV terms are ignored.
SparseVector tfidf_transform(const std::vector<std::string>& tokens, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// LDA

struct LdaConfig {
  std::size_t topics = 200;
  double alpha = -1.0;  // <= 0 means 50 / K
  double beta = 0.01;
  std::size_t iterations = 1000;
  std::size_t burn_in = 200;
  std::size_t sample_lag = 10;
  std::size_t min_df = 1;
  std::uint64_t seed = 0;
  // Inference on unseen documents.
  std::size_t infer_iterations = 100;
  std::size_t infer_burn_in = 50;
};

struct TopicModel {
  std::size_t topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  std::size_t infer_iterations = 100;
  std::size_t infer_burn_in = 50;
  std::uint64_t seed = 0;
  std::vector<std::string> vocabulary;                  // unigram terms, sorted
  std::unordered_map<std::string, std::uint32_t> word_index;
  std::vector<std::vector<double>> phi;                 // topics x vocabulary

  std::size_t vocabulary_size() const { return vocabulary.size(); }
  std::optional<std::uint32_t> index_of(std::string_view word) const;

  nlohmann::json to_json() const;
  static TopicModel from_json(const nlohmann::json& j);
};

/// Snapshot handed to the per-iteration observer of fit_lda.
struct GibbsDiagnostics {
  std::size_t iteration = 0;
  std::size_t corpus_tokens = 0;
  std::size_t assigned_tokens = 0;  // sum of the topic-count table
};

/// Collapsed Gibbs sampling; phi is the average of the smoothed count
/// estimates taken every `sample_lag` sweeps after burn-in.
TopicModel fit_lda(const std::vector<std::vector<std::string>>& corpus, const LdaConfig& config,
                   const std::function<void(const GibbsDiagnostics&)>& observer = {});

/// Topic proportions of one document with phi held fixed. Deterministic for
/// a given model. Empty / all-OOV input yields the uniform vector.
std::vector<double> infer_topics(const std::vector<std::string>& tokens, const TopicModel& model);

// ---------------------------------------------------------------------------
// Embeddings

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return tokens_.size(); }

  /// Empty optional for absent tokens; the caller falls back to the
  /// character encoder.
  std::optional<std::span<const double>> lookup(std::string_view token) const;

  /// Returns false (and keeps the existing row) for duplicates.
  bool add(std::string token, std::span<const double> vector);

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::size_t dimension_ = 0;
  std::vector<std::string> tokens_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Whitespace-separated "token v1 ... vd" lines; an optional word2vec-style
/// "count dim" header line is skipped. Throws Error{DimensionMismatch} on
/// ragged rows and Error{Io} when the file cannot be read.
EmbeddingTable load_embeddings(const std::filesystem::path& path);

}  // namespace citeworth::textrep
