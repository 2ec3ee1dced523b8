#include "citeworth/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "citeworth/error.hpp"
#include "citeworth/text_util.hpp"

namespace citeworth::features {

ContextAssembler::ContextAssembler(std::span<const LabeledSentence> pool) : pool_(pool) {
  by_id_.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) by_id_.emplace(pool[i].id, i);
}

ContextBundle ContextAssembler::assemble(std::size_t index) const {
  if (index >= pool_.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "sentence index " + std::to_string(index) +
                                                " out of range (size " +
                                                std::to_string(pool_.size()) + ")");
  }
  return assemble(pool_[index]);
}

ContextBundle ContextAssembler::assemble(const LabeledSentence& sentence) const {
  ContextBundle b;
  b.cur_sentence = sentence;
  b.section_type = sentence.section_type;
  if (sentence.prev_id) {
    auto it = by_id_.find(*sentence.prev_id);
    if (it != by_id_.end()) b.prev_sentence = pool_[it->second];
  }
  if (sentence.next_id) {
    auto it = by_id_.find(*sentence.next_id);
    if (it != by_id_.end()) b.next_sentence = pool_[it->second];
  }
  return b;
}

std::vector<ContextBundle> ContextAssembler::assemble_all() const {
  std::vector<ContextBundle> out;
  out.reserve(pool_.size());
  for (const auto& s : pool_) out.push_back(assemble(s));
  return out;
}

ContextBundle assemble_context(std::span<const LabeledSentence> split, std::size_t index) {
  return ContextAssembler(split).assemble(index);
}

std::vector<ContextBundle> make_bundles(std::span<const LabeledSentence> examples,
                                        std::span<const LabeledSentence> pool) {
  ContextAssembler assembler(pool);
  std::vector<ContextBundle> out;
  out.reserve(examples.size());
  for (const auto& s : examples) out.push_back(assembler.assemble(s));
  return out;
}

// ---------------------------------------------------------------------------

const std::array<std::string_view, HandcraftedFeatures::kCount>& HandcraftedFeatures::names() {
  static const std::array<std::string_view, kCount> n = {
      "char_len_prev", "word_len_prev", "char_len_cur",      "word_len_cur",
      "char_len_next", "word_len_next", "prev_has_citation", "next_has_citation"};
  return n;
}

HandcraftedFeatures handcrafted_features(const ContextBundle& bundle, FlagPolicy policy) {
  HandcraftedFeatures f;
  const auto& cur = bundle.cur_sentence;
  f.char_len_cur = static_cast<double>(char_length(cur.text));
  f.word_len_cur = static_cast<double>(word_length(cur.text));
  if (bundle.prev_sentence) {
    f.char_len_prev = static_cast<double>(char_length(bundle.prev_sentence->text));
    f.word_len_prev = static_cast<double>(word_length(bundle.prev_sentence->text));
    if (policy == FlagPolicy::FromLabels) f.prev_has_citation = bundle.prev_sentence->label ? 1 : 0;
  }
  if (bundle.next_sentence) {
    f.char_len_next = static_cast<double>(char_length(bundle.next_sentence->text));
    f.word_len_next = static_cast<double>(word_length(bundle.next_sentence->text));
    if (policy == FlagPolicy::FromLabels) f.next_has_citation = bundle.next_sentence->label ? 1 : 0;
  }
  return f;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cosine_similarity: vector sizes differ");
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine_similarity(const textrep::SparseVector& a, const textrep::SparseVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0;
  std::size_t i = 0, j = 0;
  while (i < a.nnz() && j < b.nnz()) {
    if (a.indices[i] == b.indices[j]) {
      dot += a.values[i++] * b.values[j++];
    } else if (a.indices[i] < b.indices[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

// ---------------------------------------------------------------------------

double Scaler::transform(std::size_t col, double value) const {
  if (col >= modes_.size()) throw Error(ErrorCode::DimensionMismatch, "scaler column out of range");
  if (passthrough_[col]) return value;
  if (modes_[col] == ScaleMode::MaxAbs) return value / max_abs_[col];
  return (value - mean_[col]) / sd_[col];
}

void Scaler::finalize() {
  passthrough_.assign(modes_.size(), false);
  degenerate_.clear();
  for (std::size_t c = 0; c < modes_.size(); ++c) {
    const bool degenerate =
        modes_[c] == ScaleMode::MaxAbs ? !(max_abs_[c] > 0.0) : !(sd_[c] > 0.0);
    if (degenerate) {
      passthrough_[c] = true;
      degenerate_.push_back(c);
    }
  }
}

nlohmann::json Scaler::to_json() const {
  std::vector<std::string> modes;
  for (auto m : modes_) modes.emplace_back(m == ScaleMode::MaxAbs ? "maxabs" : "zscore");
  return {{"modes", modes}, {"max_abs", max_abs_}, {"mean", mean_}, {"sd", sd_}};
}

Scaler Scaler::from_json(const nlohmann::json& j) {
  Scaler s;
  for (const auto& m : j.at("modes")) {
    s.modes_.push_back(m.get<std::string>() == "maxabs" ? ScaleMode::MaxAbs : ScaleMode::ZScore);
  }
  s.max_abs_ = j.at("max_abs").get<std::vector<double>>();
  s.mean_ = j.at("mean").get<std::vector<double>>();
  s.sd_ = j.at("sd").get<std::vector<double>>();
  const std::size_t n = s.modes_.size();
  if (s.max_abs_.size() != n || s.mean_.size() != n || s.sd_.size() != n) {
    throw Error(ErrorCode::BadArtifact, "scaler statistics have inconsistent sizes");
  }
  s.finalize();
  return s;
}

Scaler fit_scaler(const std::vector<std::vector<double>>& rows, const std::vector<ScaleMode>& modes) {
  const std::size_t m = modes.size();
  Scaler s;
  s.modes_ = modes;
  s.max_abs_.assign(m, 0.0);
  s.mean_.assign(m, 0.0);
  s.sd_.assign(m, 0.0);
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
      if (r.size() != m) throw Error(ErrorCode::DimensionMismatch, "fit_scaler: ragged rows");
      for (std::size_t c = 0; c < m; ++c) {
        s.max_abs_[c] = std::max(s.max_abs_[c], std::abs(r[c]));
        s.mean_[c] += r[c];
      }
    }
    for (double& v : s.mean_) v /= n;
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < m; ++c) {
        const double d = r[c] - s.mean_[c];
        s.sd_[c] += d * d;
      }
    }
    for (double& v : s.sd_) v = std::sqrt(v / n);
  }
  s.finalize();
  return s;
}

Scaler fit_scaler(const Eigen::SparseMatrix<double>& X, const std::vector<ScaleMode>& modes) {
  const auto m = static_cast<std::size_t>(X.cols());
  if (modes.size() != m) throw Error(ErrorCode::DimensionMismatch, "fit_scaler: mode count");
  Scaler s;
  s.modes_ = modes;
  s.max_abs_.assign(m, 0.0);
  s.mean_.assign(m, 0.0);
  s.sd_.assign(m, 0.0);
  const double n = static_cast<double>(X.rows());
  if (X.rows() > 0) {
    for (Eigen::Index c = 0; c < X.outerSize(); ++c) {
      const auto col = static_cast<std::size_t>(c);
      double sum = 0;
      std::size_t stored = 0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(X, c); it; ++it) {
        s.max_abs_[col] = std::max(s.max_abs_[col], std::abs(it.value()));
        sum += it.value();
        ++stored;
      }
      const double mean = sum / n;
      double ss = static_cast<double>(X.rows() - static_cast<Eigen::Index>(stored)) * mean * mean;
      for (Eigen::SparseMatrix<double>::InnerIterator it(X, c); it; ++it) {
        const double d = it.value() - mean;
        ss += d * d;
      }
      s.mean_[col] = mean;
      s.sd_[col] = std::sqrt(ss / n);
    }
  }
  s.finalize();
  return s;
}

std::vector<double> apply_scaler(const Scaler& scaler, std::span<const double> row) {
  if (row.size() != scaler.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "apply_scaler: row has " + std::to_string(row.size()) +
                                                  " columns, scaler " +
                                                  std::to_string(scaler.dimension()));
  }
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) out[c] = scaler.transform(c, row[c]);
  return out;
}

std::vector<std::vector<double>> apply_scaler(const Scaler& scaler,
                                              const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(apply_scaler(scaler, r));
  return out;
}

void apply_scaler(const Scaler& scaler, Eigen::SparseMatrix<double>& X) {
  if (static_cast<std::size_t>(X.cols()) != scaler.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "apply_scaler: column count differs from scaler");
  }
  for (Eigen::Index c = 0; c < X.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(X, c); it; ++it) {
      it.valueRef() = scaler.transform(static_cast<std::size_t>(c), it.value());
    }
  }
}

// ---------------------------------------------------------------------------

std::string_view to_string(Representation r) { return r == Representation::Bow ? "bow" : "topics"; }

Representation representation_from_string(std::string_view s) {
  if (s == "bow" || s == "tfidf") return Representation::Bow;
  if (s == "topics" || s == "lda") return Representation::Topics;
  throw Error(ErrorCode::InvalidArgument, "unknown representation '" + std::string(s) + "'");
}

namespace {

std::vector<std::string> section_tokens(const std::string& section_type) {
  return textrep::tokenize(section_type);
}

// Numeric block, in reporting order.
const std::vector<std::string>& contextual_numeric_names() {
  static const std::vector<std::string> n = {
      "char_len_prev", "word_len_prev", "char_len_cur",    "word_len_cur",
      "char_len_next", "word_len_next", "sim_prev_cur",    "sim_next_cur",
      "prev_has_citation", "next_has_citation"};
  return n;
}

const std::vector<std::string>& plain_numeric_names() {
  static const std::vector<std::string> n = {"char_len_cur", "word_len_cur"};
  return n;
}

void append_sparse(textrep::SparseVector& row, std::size_t offset, const textrep::SparseVector& v) {
  for (std::size_t i = 0; i < v.nnz(); ++i) {
    row.indices.push_back(static_cast<std::uint32_t>(offset + v.indices[i]));
    row.values.push_back(v.values[i]);
  }
}

void append_dense(textrep::SparseVector& row, std::size_t offset, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    row.indices.push_back(static_cast<std::uint32_t>(offset + i));
    row.values.push_back(v[i]);
  }
}

}  // namespace

void FeaturePipeline::build_layout() {
  names_.clear();
  categories_.clear();
  modes_.clear();
  const bool topics = config_.representation == Representation::Topics;
  auto add_block = [&](const std::string& prefix, const std::string& category,
                       const std::vector<std::string>& terms) {
    for (const auto& t : terms) {
      names_.push_back(prefix + t);
      categories_.push_back(category);
      modes_.push_back(topics ? ScaleMode::ZScore : ScaleMode::MaxAbs);
    }
  };
  std::vector<std::string> topic_names;
  if (topics) {
    for (std::size_t k = 0; k < topics_->topics; ++k) topic_names.push_back("topic_" + std::to_string(k));
  }
  const auto& sentence_terms = topics ? topic_names : sentence_vocab_.terms();

  if (config_.contextual) {
    if (topics) {
      add_block("sec:", "section", topic_names);
    } else if (section_vocab_) {
      add_block("sec:", "section", section_vocab_->terms());
    }
    add_block("prev:", "prev", sentence_terms);
    add_block("cur:", "cur", sentence_terms);
    add_block("next:", "next", sentence_terms);
  } else {
    add_block("cur:", "cur", sentence_terms);
  }
  for (const auto& n : config_.contextual ? contextual_numeric_names() : plain_numeric_names()) {
    names_.push_back(n);
    categories_.push_back(n);
    modes_.push_back(ScaleMode::ZScore);
  }
}

textrep::SparseVector FeaturePipeline::raw_row(const ContextBundle& bundle, FlagPolicy policy) const {
  const bool topics = config_.representation == Representation::Topics;
  const std::size_t block = topics ? topics_->topics : sentence_vocab_.size();

  const auto cur_tokens = textrep::tokenize(bundle.cur_sentence.text);
  const auto cur_tfidf = textrep::tfidf_transform(cur_tokens, sentence_vocab_);

  auto text_block = [&](const std::vector<std::string>& tokens, const textrep::SparseVector& tfidf,
                        bool present, textrep::SparseVector& row, std::size_t offset) {
    if (topics) {
      append_dense(row, offset,
                   present ? textrep::infer_topics(tokens, *topics_) : std::vector<double>(block, 0.0));
    } else if (present) {
      append_sparse(row, offset, tfidf);
    }
  };

  textrep::SparseVector row;
  row.dimension = names_.size();
  std::size_t offset = 0;
  const auto h = handcrafted_features(bundle, policy);

  if (!config_.contextual) {
    text_block(cur_tokens, cur_tfidf, true, row, offset);
    offset += block;
    append_dense(row, offset, {h.char_len_cur, h.word_len_cur});
    return row;
  }

  if (topics || section_vocab_) {
    const auto sec_tokens = section_tokens(bundle.section_type);
    const bool has_section = !sec_tokens.empty();
    if (topics) {
      text_block(sec_tokens, {}, has_section, row, offset);
      offset += block;
    } else {
      append_sparse(row, offset, textrep::tfidf_transform(sec_tokens, *section_vocab_));
      offset += section_vocab_->size();
    }
  }

  std::vector<std::string> prev_tokens, next_tokens;
  textrep::SparseVector prev_tfidf, next_tfidf;
  if (bundle.prev_sentence) {
    prev_tokens = textrep::tokenize(bundle.prev_sentence->text);
    prev_tfidf = textrep::tfidf_transform(prev_tokens, sentence_vocab_);
  }
  if (bundle.next_sentence) {
    next_tokens = textrep::tokenize(bundle.next_sentence->text);
    next_tfidf = textrep::tfidf_transform(next_tokens, sentence_vocab_);
  }
  text_block(prev_tokens, prev_tfidf, bundle.prev_sentence.has_value(), row, offset);
  offset += block;
  text_block(cur_tokens, cur_tfidf, true, row, offset);
  offset += block;
  text_block(next_tokens, next_tfidf, bundle.next_sentence.has_value(), row, offset);
  offset += block;

  const double sim_prev = bundle.prev_sentence ? cosine_similarity(prev_tfidf, cur_tfidf) : 0.0;
  const double sim_next = bundle.next_sentence ? cosine_similarity(next_tfidf, cur_tfidf) : 0.0;
  append_dense(row, offset,
               {h.char_len_prev, h.word_len_prev, h.char_len_cur, h.word_len_cur, h.char_len_next,
                h.word_len_next, sim_prev, sim_next, h.prev_has_citation, h.next_has_citation});
  return row;
}

FeaturePipeline FeaturePipeline::fit(const std::vector<ContextBundle>& train,
                                     const FeatureConfig& config) {
  if (train.empty()) throw Error(ErrorCode::InsufficientData, "no training bundles");
  FeaturePipeline p;
  p.config_ = config;

  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(train.size());
  for (const auto& b : train) sentences.push_back(textrep::tokenize(b.cur_sentence.text));
  p.sentence_vocab_ = textrep::fit_vocab(sentences, 2, config.min_df);

  if (config.representation == Representation::Topics) {
    p.topics_ = textrep::fit_lda(sentences, config.lda);
  } else if (config.contextual) {
    std::vector<std::vector<std::string>> sections;
    for (const auto& b : train) {
      auto toks = section_tokens(b.section_type);
      if (!toks.empty()) sections.push_back(std::move(toks));
    }
    if (!sections.empty()) {
      try {
        p.section_vocab_ = textrep::fit_vocab(sections, 2, config.section_min_df);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyVocabulary) throw;
      }
    }
  }
  p.build_layout();

  Eigen::SparseMatrix<double> X = p.transform(train, FlagPolicy::FromLabels);
  // transform() applied the default (identity) scaler; fit on the raw values.
  p.scaler_ = fit_scaler(X, p.modes_);
  return p;
}

textrep::SparseVector FeaturePipeline::transform(const ContextBundle& bundle, FlagPolicy policy) const {
  textrep::SparseVector row = raw_row(bundle, policy);
  if (scaler_.dimension() == names_.size()) {
    for (std::size_t i = 0; i < row.nnz(); ++i) {
      row.values[i] = scaler_.transform(row.indices[i], row.values[i]);
    }
  }
  return row;
}

Eigen::SparseMatrix<double> FeaturePipeline::transform(const std::vector<ContextBundle>& bundles,
                                                       FlagPolicy policy) const {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < bundles.size(); ++r) {
    const auto row = transform(bundles[r], policy);
    for (std::size_t i = 0; i < row.nnz(); ++i) {
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(row.indices[i]), row.values[i]);
    }
  }
  Eigen::SparseMatrix<double> X(static_cast<Eigen::Index>(bundles.size()),
                                static_cast<Eigen::Index>(names_.size()));
  X.setFromTriplets(triplets.begin(), triplets.end());
  return X;
}

nlohmann::json FeaturePipeline::to_json() const {
  nlohmann::json j;
  j["representation"] = std::string(to_string(config_.representation));
  j["contextual"] = config_.contextual;
  j["min_df"] = config_.min_df;
  j["section_min_df"] = config_.section_min_df;
  j["sentence_vocabulary"] = sentence_vocab_.to_json();
  j["section_vocabulary"] = section_vocab_ ? section_vocab_->to_json() : nlohmann::json(nullptr);
  j["topic_model"] = topics_ ? topics_->to_json() : nlohmann::json(nullptr);
  j["scaler"] = scaler_.to_json();
  return j;
}

FeaturePipeline FeaturePipeline::from_json(const nlohmann::json& j) {
  FeaturePipeline p;
  p.config_.representation = representation_from_string(j.at("representation").get<std::string>());
  p.config_.contextual = j.at("contextual").get<bool>();
  p.config_.min_df = j.at("min_df").get<std::size_t>();
  p.config_.section_min_df = j.at("section_min_df").get<std::size_t>();
  p.sentence_vocab_ = textrep::Vocabulary::from_json(j.at("sentence_vocabulary"));
  if (!j.at("section_vocabulary").is_null()) {
    p.section_vocab_ = textrep::Vocabulary::from_json(j.at("section_vocabulary"));
  }
  if (!j.at("topic_model").is_null()) {
    p.topics_ = textrep::TopicModel::from_json(j.at("topic_model"));
    p.config_.lda.topics = p.topics_->topics;
  }
  if (p.config_.representation == Representation::Topics && !p.topics_) {
    throw Error(ErrorCode::BadArtifact, "topic representation without a topic model");
  }
  p.scaler_ = Scaler::from_json(j.at("scaler"));
  p.build_layout();
  if (p.scaler_.dimension() != p.names_.size()) {
    throw Error(ErrorCode::BadArtifact, "scaler dimension does not match feature layout");
  }
  return p;
}

}  // namespace citeworth::features
