#pragma once

// Shared fixtures and generators for the unit and acceptance tests.

#include <string>
#include <vector>

#include "citeworth/corpus.hpp"
#include "citeworth/features.hpp"
#include "citeworth/neural.hpp"

namespace testing {

using citeworth::corpus::LabeledSentence;
using citeworth::features::ContextBundle;

std::string fixture_path(const std::string& relative);

/// The three hand-written JATS articles, parsed, in file order.
std::vector<citeworth::corpus::ArticleTree> fixture_articles();

LabeledSentence sentence(const std::string& id, const std::string& article, const std::string& text,
                         bool label, const std::string& section = "results");

/// Sentences of one document in reading order, neighbor-linked.
std::vector<LabeledSentence> document(const std::string& article, const std::vector<std::string>& texts,
                                      const std::vector<int>& labels, const std::string& section = "results");

/// `n` single-sentence documents; label 1 iff the sentence contains
/// "previously". Filler words are shared by both classes.
std::vector<LabeledSentence> separable_set(std::size_t n, std::uint64_t seed);

/// Documents whose labels follow the period-3 pattern 0 1 0: a sentence is
/// citing exactly when neither neighbor is. Sentence text is drawn from one
/// distribution regardless of label, so only the neighbor flags carry signal.
std::vector<LabeledSentence> neighbor_signal_set(std::size_t documents, std::size_t per_document,
                                                 std::uint64_t seed);

/// Small network for gradient checks: hidden 4, char hidden 3, 10 words.
citeworth::neural::NeuralModel tiny_model(citeworth::neural::AttentionVariant variant, bool contextual,
                                          std::uint64_t seed = 7);

/// Bundles over the ten words of the tiny model, with neighbors.
std::vector<ContextBundle> tiny_batch();

/// Three-corpus-article split built from the fixture articles.
citeworth::corpus::CorpusSplit fixture_split();

/// Random temporary directory under the system temp path.
std::string temp_dir(const std::string& tag);

}  // namespace testing

namespace testing {

/// Hint strings that must disappear completely.
const std::vector<std::string>& hint_examples();

/// Parentheticals that are not citations and must survive stripping.
const std::vector<std::string>& preserved_parentheticals();

/// Compares the labeled fixture corpus against the hand-verified expectation;
/// returns one line per mismatch (empty when everything matches).
std::vector<std::string> fixture_corpus_mismatches();

/// Seeded random sentences mixing words, numbers, brackets and hint fragments.
std::vector<std::string> fuzz_sentences(std::size_t n, std::uint64_t seed);

}  // namespace testing

#include <Eigen/SparseCore>

namespace testing {

struct Dataset {
  Eigen::SparseMatrix<double> X;
  std::vector<int> y;
};

/// Dense random design stored sparse; labels drawn from a logistic model
/// with small weights so the classes overlap.
Dataset logistic_data(std::size_t rows, std::size_t cols, std::uint64_t seed, double weight_scale = 0.5);

/// Four inputs: two binary XOR bits and two uniform noise columns.
Dataset xor4_data(std::size_t rows, std::uint64_t seed);

/// Mean logistic loss minimized by plain gradient descent with intercept,
/// dense arithmetic; returns {intercept, beta...}. Sets `gradient_norm` to the
/// final gradient norm so callers can confirm convergence.
std::vector<double> gradient_descent_logistic(const Dataset& d, std::size_t iterations, double& gradient_norm);

}  // namespace testing

namespace testing {

/// Split with the requested class counts per part. Citing sentences mention
/// "previously"; all parts are neighbor-linked in documents of ten.
citeworth::corpus::CorpusSplit synthetic_split(std::size_t train_pos, std::size_t train_neg, std::size_t valid_pos,
                                               std::size_t valid_neg, std::size_t test_pos, std::size_t test_neg,
                                               std::uint64_t seed);

}  // namespace testing

#include "citeworth/classifier.hpp"
#include "citeworth/cli.hpp"

namespace testing {

/// Fast training options for one family: fixed penalty, few trees, tiny network.
citeworth::cli::TrainOptions quick_options(citeworth::model::Family family);

/// A small trained model on synthetic_split(30, 90, 5, 15, 10, 30, seed).
citeworth::model::Classifier quick_model(citeworth::model::Family family, std::uint64_t seed = 1);

}  // namespace testing
