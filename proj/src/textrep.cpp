#include "citeworth/textrep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "citeworth/error.hpp"
#include "citeworth/text_util.hpp"

namespace citeworth::textrep {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool numeric = true;
    while (j < n) {
      const auto c = static_cast<unsigned char>(text[j]);
      if (is_word_byte(c)) {
        numeric = numeric && is_digit(c);
        ++j;
      } else if ((c == '.' || c == ',') && j > i && is_digit(static_cast<unsigned char>(text[j - 1])) &&
                 j + 1 < n && is_digit(static_cast<unsigned char>(text[j + 1]))) {
        ++j;
      } else {
        break;
      }
    }
    if (numeric) {
      out.emplace_back(kNumberToken);
    } else {
      // Separators only survive between digits inside a mixed token ("v1.2").
      out.push_back(to_lower_ascii(text.substr(i, j - i)));
    }
    i = j;
  }
  return out;
}

std::vector<std::string> ngrams(const std::vector<std::string>& tokens, int max_n) {
  std::vector<std::string> out(tokens.begin(), tokens.end());
  for (int n = 2; n <= max_n; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (int k = 1; k < n; ++k) g += "_" + tokens[i + static_cast<std::size_t>(k)];
      out.push_back(std::move(g));
    }
  }
  return out;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double Vocabulary::idf(std::uint32_t index) const {
  return std::log((1.0 + static_cast<double>(document_count_)) /
                  (1.0 + static_cast<double>(df_[index]))) +
         1.0;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& t : terms_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\0", 1), h);
  }
  return h;
}

void Vocabulary::rebuild_index() {
  index_.clear();
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    index_.emplace(terms_[i], static_cast<std::uint32_t>(i));
  }
}

nlohmann::json Vocabulary::to_json() const {
  return {{"magic", "citeworth-vocabulary"},
          {"format_version", 1},
          {"document_count", document_count_},
          {"min_df", min_df_},
          {"max_ngram", max_ngram_},
          {"terms", terms_},
          {"df", df_}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (j.value("magic", "") != "citeworth-vocabulary" || j.value("format_version", 0) != 1) {
    throw Error(ErrorCode::BadArtifact, "not a version-1 vocabulary record");
  }
  Vocabulary v;
  v.document_count_ = j.at("document_count").get<std::size_t>();
  v.min_df_ = j.at("min_df").get<std::size_t>();
  v.max_ngram_ = j.at("max_ngram").get<int>();
  v.terms_ = j.at("terms").get<std::vector<std::string>>();
  v.df_ = j.at("df").get<std::vector<std::size_t>>();
  if (v.terms_.size() != v.df_.size()) throw Error(ErrorCode::BadArtifact, "vocabulary df size");
  v.rebuild_index();
  return v;
}

Vocabulary fit_vocab(const std::vector<std::vector<std::string>>& corpus, int max_ngram,
                     std::size_t min_df) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyVocabulary, "empty corpus");
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    auto grams = ngrams(doc, max_ngram);
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) ++df[g];
  }
  Vocabulary v;
  v.document_count_ = corpus.size();
  v.min_df_ = min_df;
  v.max_ngram_ = max_ngram;
  for (const auto& [term, count] : df) {
    if (count >= min_df) v.terms_.push_back(term);
  }
  if (v.terms_.empty()) {
    throw Error(ErrorCode::EmptyVocabulary,
                "no term reaches min_df=" + std::to_string(min_df));
  }
  std::sort(v.terms_.begin(), v.terms_.end());
  v.df_.reserve(v.terms_.size());
  for (const auto& t : v.terms_) v.df_.push_back(df.at(t));
  v.rebuild_index();
  return v;
}

SparseVector tfidf_transform(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const auto& g : ngrams(tokens, vocab.max_ngram())) {
    if (auto idx = vocab.index_of(g)) counts[*idx] += 1.0;
  }
  SparseVector out;
  out.dimension = vocab.size();
  double norm2 = 0.0;
  for (const auto& [idx, tf] : counts) {
    const double v = tf * vocab.idf(idx);
    out.indices.push_back(idx);
    out.values.push_back(v);
    norm2 += v * v;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : out.values) v *= inv;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::optional<std::span<const double>> EmbeddingTable::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return std::span<const double>(data_.data() + it->second * dimension_, dimension_);
}

bool EmbeddingTable::add(std::string token, std::span<const double> vector) {
  if (vector.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, "vector for '" + token + "' has " +
                                                  std::to_string(vector.size()) +
                                                  " components, expected " +
                                                  std::to_string(dimension_));
  }
  if (index_.count(token) > 0) return false;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  data_.insert(data_.end(), vector.begin(), vector.end());
  return true;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read embeddings " + path.string());
  EmbeddingTable table;
  bool have_dimension = false;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    values.clear();
    std::string field;
    while (fields >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw Error(ErrorCode::DimensionMismatch,
                    path.string() + ":" + std::to_string(line_no) + ": non-numeric component");
      }
    }
    if (line_no == 1 && values.size() == 1 &&
        std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      continue;  // "count dim" header
    }
    if (!have_dimension) {
      if (values.empty()) {
        throw Error(ErrorCode::DimensionMismatch, path.string() + ": row without components");
      }
      table = EmbeddingTable(values.size());
      have_dimension = true;
    }
    if (values.size() != table.dimension()) {
      throw Error(ErrorCode::DimensionMismatch,
                  path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(table.dimension()) + " components, got " +
                      std::to_string(values.size()));
    }
    table.add(std::move(token), values);
  }
  return table;
}

}  // namespace citeworth::textrep
