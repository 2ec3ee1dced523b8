#pragma once

// Metrics on the citing class, the down-sampling sweep, the cross-corpus
// grid and the ranked high-probability report.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "citeworth/corpus.hpp"

namespace citeworth::eval {

using corpus::LabeledSentence;

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
};

struct MetricTriple {
  double precision = 0, recall = 0, f1 = 0;
  bool degenerate = false;  // some denominator was zero
};

/// Predictions and labels are 0/1; the positive (citing) class is 1.
/// Throws Error{LengthMismatch} / Error{EmptyInput}.
ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels);

MetricTriple prf1(const ConfusionCounts& counts);
MetricTriple prf1(std::span<const int> predictions, std::span<const int> labels);

/// Decisions `probability >= threshold`.
std::vector<int> decide(std::span<const double> probabilities, double threshold);

/// Confusion counts whose precision and recall equal the given values (to
/// the resolution of `tp`).
ConfusionCounts synthetic_counts(double precision, double recall, std::size_t tp = 1000000);

std::vector<int> labels_of(std::span<const LabeledSentence> sentences);

// ---------------------------------------------------------------------------
// Harness plumbing. A trainer receives its examples plus the pool their
// neighbor links resolve against, and returns a scorer.

struct Examples {
  std::span<const LabeledSentence> examples;
  std::span<const LabeledSentence> pool;
};

using ScoreFn = std::function<std::vector<double>(const Examples&)>;
using TrainFn = std::function<ScoreFn(const Examples& train, const Examples& validation)>;

// ---------------------------------------------------------------------------
// Down-sampling

struct DownsampleResult {
  std::vector<LabeledSentence> train;
  std::size_t minority = 0;
  std::size_t majority = 0;      // after sampling
  bool unchanged = false;        // ratio unreachable; input returned as is
  std::string warning;
};

/// non-citing / citing, 0 without citing sentences.
double natural_ratio(std::span<const LabeledSentence> sentences);

/// Keeps every citing sentence and round(ratio * citing) non-citing ones,
/// chosen uniformly without replacement (seeded), in original order. When the
/// target is not below the available majority count the input is returned
/// unchanged with a warning. Throws Error{InvalidArgument} for ratio < 1.
DownsampleResult downsample(std::span<const LabeledSentence> train, double ratio, std::uint64_t seed);

struct SweepRow {
  double ratio = 0;
  std::size_t minority = 0;
  std::size_t majority = 0;
  bool unchanged = false;
  MetricTriple metrics;
};

/// Trains on each down-sampled training set (neighbors still resolve against
/// the full training split) and evaluates on the untouched test split.
std::vector<SweepRow> downsample_sweep(const corpus::CorpusSplit& split,
                                       std::span<const double> ratios, const TrainFn& train,
                                       double threshold, std::uint64_t seed);

std::string sweep_csv(const std::vector<SweepRow>& rows);

// ---------------------------------------------------------------------------
// Cross-corpus generalization

struct NamedCorpus {
  std::string name;
  corpus::CorpusSplit split;
};

struct GridRow {
  std::string train;
  std::string test;
  MetricTriple metrics;
};

struct CrossCorpusTable {
  std::vector<GridRow> rows;  // k*k single-corpus rows, then k combined rows
};

inline constexpr const char* kCombinedName = "combined";

/// Trains on every corpus and on a combined sample drawing an equal share
/// from each corpus (total = the smallest training set), and evaluates each
/// model on every test set. Throws Error{InvalidArgument} for fewer than two
/// corpora and Error{FormatMismatch} for a corpus with an empty train or test
/// split.
CrossCorpusTable cross_corpus(const std::vector<NamedCorpus>& corpora, const TrainFn& train,
                              double threshold, std::uint64_t seed);

std::string cross_corpus_csv(const CrossCorpusTable& table);
nlohmann::json cross_corpus_json(const CrossCorpusTable& table);

// ---------------------------------------------------------------------------
// Ranked report

struct RankedRow {
  std::string id;
  std::string text;
  std::string section_type;
  double probability = 0;
  bool label = false;
};

/// Sentences with probability >= threshold, sorted by probability descending
/// (stable), truncated to top_k. Throws Error{LengthMismatch}.
std::vector<RankedRow> ranked_report(std::span<const LabeledSentence> sentences,
                                     std::span<const double> probabilities, double threshold,
                                     std::size_t top_k);

std::string ranked_csv(const std::vector<RankedRow>& rows);
nlohmann::json ranked_json(const std::vector<RankedRow>& rows);

/// CSV field quoting.
std::string csv_field(const std::string& s);

}  // namespace citeworth::eval
