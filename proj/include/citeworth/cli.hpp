#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "citeworth/classifier.hpp"
#include "citeworth/eval.hpp"

namespace citeworth::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;

/// Everything needed to fit one model of any family.
struct TrainOptions {
  model::Family family = model::Family::Enlr;
  bool contextual = true;
  std::uint64_t seed = 0;
  double threshold = 0.5;

  // interpretable models
  features::Representation representation = features::Representation::Bow;
  std::size_t min_df = 5;
  std::size_t topics = 200;
  std::size_t lda_iterations = 1000;
  std::size_t folds = 5;
  double alpha = -1;   // < 0: cross-validate
  double lambda = -1;  // < 0: cross-validate
  std::size_t trees = 100;
  std::size_t max_features = 0;
  std::size_t threads = 0;

  // neural
  neural::AttentionVariant attention = neural::AttentionVariant::Cos;
  std::size_t word_dim = 128;
  std::size_t hidden = 128;
  std::size_t char_dim = 15;
  std::size_t char_hidden = 15;
  std::size_t mlp_hidden = 64;
  double dropout = 0.5;
  double l2 = 1e-7;
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::size_t patience = 3;
  std::string embeddings;  // optional pre-trained vector file
};

/// Fits one model. `validation` drives early stopping for the neural family
/// and is ignored otherwise. Training progress goes to `log` when non-null.
model::Classifier train_classifier(const TrainOptions& options, const eval::Examples& train,
                                   const eval::Examples& validation, std::ostream* log = nullptr);

/// P(citing) for each example, neighbors resolved against the pool, flags
/// taken from corpus labels.
std::vector<double> score_examples(const model::Classifier& model, const eval::Examples& examples);

/// argv-style entry point. Output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace citeworth::cli
