#pragma once

// Citation context assembly, handcrafted features, similarity, scaling, and
// the feature pipeline used by the interpretable models.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "citeworth/corpus.hpp"
#include "citeworth/textrep.hpp"

namespace citeworth::features {

using corpus::LabeledSentence;

struct ContextBundle {
  std::optional<LabeledSentence> prev_sentence;
  LabeledSentence cur_sentence;
  std::optional<LabeledSentence> next_sentence;
  std::string section_type;
};

/// Resolves neighbor links against a pool of sentences (normally every
/// sentence of one split, so links never cross a split boundary).
class ContextAssembler {
 public:
  explicit ContextAssembler(std::span<const LabeledSentence> pool);

  std::size_t size() const { return pool_.size(); }

  /// Throws Error{IndexOutOfRange}.
  ContextBundle assemble(std::size_t index) const;
  ContextBundle assemble(const LabeledSentence& sentence) const;

  std::vector<ContextBundle> assemble_all() const;

 private:
  std::span<const LabeledSentence> pool_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

ContextBundle assemble_context(std::span<const LabeledSentence> split, std::size_t index);

/// Builds bundles for `examples`, resolving neighbors in `pool` (which may be
/// larger, e.g. the split before down-sampling).
std::vector<ContextBundle> make_bundles(std::span<const LabeledSentence> examples,
                                        std::span<const LabeledSentence> pool);

// ---------------------------------------------------------------------------

/// How neighbor citation flags are obtained.
enum class FlagPolicy {
  FromLabels,  // training: the neighbors' corpus labels
  Zero,        // inference default: a draft has no citation markers
};

struct HandcraftedFeatures {
  static constexpr std::size_t kCount = 8;
  static const std::array<std::string_view, kCount>& names();

  double char_len_prev = 0, word_len_prev = 0;
  double char_len_cur = 0, word_len_cur = 0;
  double char_len_next = 0, word_len_next = 0;
  double prev_has_citation = 0, next_has_citation = 0;

  std::array<double, kCount> values() const {
    return {char_len_prev, word_len_prev, char_len_cur,      word_len_cur,
            char_len_next, word_len_next, prev_has_citation, next_has_citation};
  }
};

HandcraftedFeatures handcrafted_features(const ContextBundle& bundle,
                                         FlagPolicy policy = FlagPolicy::FromLabels);

/// a.b / (|a||b|), 0 when either norm is 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const textrep::SparseVector& a, const textrep::SparseVector& b);

// ---------------------------------------------------------------------------

enum class ScaleMode { MaxAbs, ZScore };

/// Column-wise scaler. MaxAbs columns keep zeros at zero (safe for sparse
/// blocks); ZScore columns use the population standard deviation. Degenerate
/// columns (all-zero MaxAbs, constant ZScore) pass through unchanged and are
/// recorded.
class Scaler {
 public:
  Scaler() = default;

  std::size_t dimension() const { return modes_.size(); }
  ScaleMode mode(std::size_t col) const { return modes_[col]; }
  const std::vector<std::size_t>& degenerate_columns() const { return degenerate_; }
  double max_abs(std::size_t col) const { return max_abs_[col]; }
  double mean(std::size_t col) const { return mean_[col]; }
  double stddev(std::size_t col) const { return sd_[col]; }

  double transform(std::size_t col, double value) const;

  nlohmann::json to_json() const;
  static Scaler from_json(const nlohmann::json& j);

  friend Scaler fit_scaler(const std::vector<std::vector<double>>&, const std::vector<ScaleMode>&);
  friend Scaler fit_scaler(const Eigen::SparseMatrix<double>&, const std::vector<ScaleMode>&);

 private:
  std::vector<ScaleMode> modes_;
  std::vector<double> max_abs_, mean_, sd_;
  std::vector<bool> passthrough_;
  std::vector<std::size_t> degenerate_;

  void finalize();
};

/// Fit on training rows only.
Scaler fit_scaler(const std::vector<std::vector<double>>& rows, const std::vector<ScaleMode>& modes);

/// Sparse fit. Implicit zeros count as observations.
Scaler fit_scaler(const Eigen::SparseMatrix<double>& X, const std::vector<ScaleMode>& modes);

std::vector<double> apply_scaler(const Scaler& scaler, std::span<const double> row);
std::vector<std::vector<double>> apply_scaler(const Scaler& scaler,
                                              const std::vector<std::vector<double>>& rows);

/// Scales the stored entries. Every ZScore column must be stored explicitly in
/// every row (FeaturePipeline guarantees this for its dense block).
void apply_scaler(const Scaler& scaler, Eigen::SparseMatrix<double>& X);

// ---------------------------------------------------------------------------

enum class Representation { Bow, Topics };

std::string_view to_string(Representation r);
Representation representation_from_string(std::string_view s);

struct FeatureConfig {
  Representation representation = Representation::Bow;
  bool contextual = true;
  std::size_t min_df = 5;
  std::size_t section_min_df = 1;
  textrep::LdaConfig lda{};
};

/// Named feature layout + fitted statistics for the interpretable models.
///
/// Contextual layout: section terms, previous-sentence terms, current terms,
/// next terms, then the numeric block (six lengths, two similarities, two
/// neighbor-citation flags). Non-contextual: current terms plus the current
/// sentence's two lengths. With the Topics representation each text block is
/// a K-dimensional topic mixture instead of tf-idf terms.
class FeaturePipeline {
 public:
  static FeaturePipeline fit(const std::vector<ContextBundle>& train, const FeatureConfig& config);

  const FeatureConfig& config() const { return config_; }
  std::size_t dimension() const { return names_.size(); }
  const std::vector<std::string>& feature_names() const { return names_; }

  /// Category of each feature: "section", "prev", "cur", "next" for text
  /// blocks, the feature's own name for numeric features.
  const std::vector<std::string>& feature_categories() const { return categories_; }

  /// One scaled feature row.
  textrep::SparseVector transform(const ContextBundle& bundle,
                                  FlagPolicy policy = FlagPolicy::FromLabels) const;

  /// Scaled design matrix (rows = bundles), column-major for the solvers.
  Eigen::SparseMatrix<double> transform(const std::vector<ContextBundle>& bundles,
                                        FlagPolicy policy = FlagPolicy::FromLabels) const;

  const textrep::Vocabulary& sentence_vocabulary() const { return sentence_vocab_; }
  const Scaler& scaler() const { return scaler_; }

  nlohmann::json to_json() const;
  static FeaturePipeline from_json(const nlohmann::json& j);

 private:
  FeatureConfig config_;
  textrep::Vocabulary sentence_vocab_;
  std::optional<textrep::Vocabulary> section_vocab_;
  std::optional<textrep::TopicModel> topics_;
  Scaler scaler_;
  std::vector<std::string> names_;
  std::vector<std::string> categories_;
  std::vector<ScaleMode> modes_;

  textrep::SparseVector raw_row(const ContextBundle& bundle, FlagPolicy policy) const;
  void build_layout();
};

}  // namespace citeworth::features
