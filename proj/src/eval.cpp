#include "citeworth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "citeworth/error.hpp"
#include "citeworth/rng.hpp"

namespace citeworth::eval {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "nothing to evaluate");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] != 0;
    const bool l = labels[i] != 0;
    if (p && l) ++c.tp;
    else if (p) ++c.fp;
    else if (l) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricTriple prf1(const ConfusionCounts& c) {
  MetricTriple m;
  const std::size_t pp = c.tp + c.fp;
  const std::size_t ap = c.tp + c.fn;
  if (pp == 0 || ap == 0) m.degenerate = true;
  m.precision = pp ? static_cast<double>(c.tp) / static_cast<double>(pp) : 0.0;
  m.recall = ap ? static_cast<double>(c.tp) / static_cast<double>(ap) : 0.0;
  if (m.precision + m.recall > 0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1 = 0.0;
    m.degenerate = true;
  }
  return m;
}

MetricTriple prf1(std::span<const int> predictions, std::span<const int> labels) {
  return prf1(confusion(predictions, labels));
}

std::vector<int> decide(std::span<const double> probabilities, double threshold) {
  std::vector<int> out(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) out[i] = probabilities[i] >= threshold;
  return out;
}

ConfusionCounts synthetic_counts(double precision, double recall, std::size_t tp) {
  if (!(precision > 0 && precision <= 1 && recall > 0 && recall <= 1)) {
    throw Error(ErrorCode::InvalidArgument, "precision and recall must lie in (0, 1]");
  }
  ConfusionCounts c;
  const double t = static_cast<double>(tp);
  c.tp = tp;
  c.fp = static_cast<std::size_t>(std::llround(t / precision - t));
  c.fn = static_cast<std::size_t>(std::llround(t / recall - t));
  return c;
}

std::vector<int> labels_of(std::span<const LabeledSentence> sentences) {
  std::vector<int> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(s.label ? 1 : 0);
  return out;
}

// ---------------------------------------------------------------------------

double natural_ratio(std::span<const LabeledSentence> sentences) {
  std::size_t pos = 0;
  for (const auto& s : sentences) pos += s.label;
  if (pos == 0) return 0.0;
  return static_cast<double>(sentences.size() - pos) / static_cast<double>(pos);
}

DownsampleResult downsample(std::span<const LabeledSentence> train, double ratio, std::uint64_t seed) {
  if (!(ratio >= 1.0)) throw Error(ErrorCode::InvalidArgument, "down-sampling ratio must be >= 1");
  std::vector<std::size_t> majority;
  std::size_t minority = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label) ++minority;
    else majority.push_back(i);
  }
  DownsampleResult r;
  r.minority = minority;
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(minority)));
  if (target >= majority.size()) {
    r.train.assign(train.begin(), train.end());
    r.majority = majority.size();
    r.unchanged = true;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "RatioUnreachable: ratio %.4g needs %zu non-citing sentences, %zu available; "
                  "training set left unchanged",
                  ratio, target, majority.size());
    r.warning = buf;
    return r;
  }
  Rng rng(seed);
  // Partial Fisher-Yates picks `target` indices uniformly without replacement.
  for (std::size_t k = 0; k < target; ++k) {
    std::swap(majority[k], majority[k + rng.uniform_index(majority.size() - k)]);
  }
  std::vector<bool> keep(train.size(), false);
  for (std::size_t k = 0; k < target; ++k) keep[majority[k]] = true;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label || keep[i]) r.train.push_back(train[i]);
  }
  r.majority = target;
  return r;
}

std::vector<SweepRow> downsample_sweep(const corpus::CorpusSplit& split,
                                       std::span<const double> ratios, const TrainFn& train,
                                       double threshold, std::uint64_t seed) {
  std::vector<SweepRow> rows;
  const auto test_labels = labels_of(split.test);
  for (double ratio : ratios) {
    const auto ds = downsample(split.train, ratio, seed);
    const ScoreFn score =
        train(Examples{ds.train, split.train}, Examples{split.validation, split.validation});
    const auto probs = score(Examples{split.test, split.test});
    SweepRow row;
    row.ratio = ratio;
    row.minority = ds.minority;
    row.majority = ds.majority;
    row.unchanged = ds.unchanged;
    row.metrics = prf1(decide(probs, threshold), test_labels);
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "ratio,citing,non_citing,unchanged,precision,recall,f1\n";
  for (const auto& r : rows) {
    char ratio[32];
    std::snprintf(ratio, sizeof ratio, "%g", r.ratio);
    out << ratio << ',' << r.minority << ',' << r.majority << ',' << (r.unchanged ? 1 : 0) << ','
        << fmt(r.metrics.precision) << ',' << fmt(r.metrics.recall) << ',' << fmt(r.metrics.f1)
        << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

std::vector<LabeledSentence> sample_equal_shares(const std::vector<const std::vector<LabeledSentence>*>& sets,
                                                 std::size_t total, Rng& rng) {
  std::vector<LabeledSentence> out;
  const std::size_t k = sets.size();
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t share = total / k + (c < total % k ? 1 : 0);
    std::vector<std::size_t> idx(sets[c]->size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t take = std::min(share, idx.size());
    for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) out.push_back((*sets[c])[i]);
  }
  return out;
}

}  // namespace

CrossCorpusTable cross_corpus(const std::vector<NamedCorpus>& corpora, const TrainFn& train,
                              double threshold, std::uint64_t seed) {
  if (corpora.size() < 2) throw Error(ErrorCode::InvalidArgument, "cross-corpus needs at least 2 corpora");
  for (const auto& c : corpora) {
    if (c.split.train.empty() || c.split.test.empty()) {
      throw Error(ErrorCode::FormatMismatch, "corpus '" + c.name + "' lacks a train or test split");
    }
  }
  CrossCorpusTable table;
  auto evaluate_on_all = [&](const std::string& train_name, const ScoreFn& score) {
    for (const auto& target : corpora) {
      const auto probs = score(Examples{target.split.test, target.split.test});
      table.rows.push_back(
          {train_name, target.name, prf1(decide(probs, threshold), labels_of(target.split.test))});
    }
  };

  for (const auto& source : corpora) {
    const auto& s = source.split;
    const auto& valid = s.validation.empty() ? s.train : s.validation;
    evaluate_on_all(source.name, train(Examples{s.train, s.train}, Examples{valid, valid}));
  }

  std::size_t min_train = corpora.front().split.train.size();
  std::size_t min_valid = corpora.front().split.validation.size();
  std::vector<const std::vector<LabeledSentence>*> trains, valids;
  std::vector<LabeledSentence> pool;
  for (const auto& c : corpora) {
    min_train = std::min(min_train, c.split.train.size());
    min_valid = std::min(min_valid, c.split.validation.size());
    trains.push_back(&c.split.train);
    valids.push_back(&c.split.validation);
    pool.insert(pool.end(), c.split.train.begin(), c.split.train.end());
  }
  Rng rng(seed);
  const auto combined_train = sample_equal_shares(trains, min_train, rng);
  auto combined_valid = sample_equal_shares(valids, min_valid, rng);
  if (combined_valid.empty()) combined_valid = combined_train;
  evaluate_on_all(kCombinedName, train(Examples{combined_train, pool},
                                       Examples{combined_valid, combined_valid}));
  return table;
}

std::string cross_corpus_csv(const CrossCorpusTable& table) {
  std::ostringstream out;
  out << "train,test,precision,recall,f1\n";
  for (const auto& r : table.rows) {
    out << csv_field(r.train) << ',' << csv_field(r.test) << ',' << fmt(r.metrics.precision) << ','
        << fmt(r.metrics.recall) << ',' << fmt(r.metrics.f1) << '\n';
  }
  return out.str();
}

nlohmann::json cross_corpus_json(const CrossCorpusTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"train", r.train},
                    {"test", r.test},
                    {"label", r.train + "->" + r.test},
                    {"precision", r.metrics.precision},
                    {"recall", r.metrics.recall},
                    {"f1", r.metrics.f1}});
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<RankedRow> ranked_report(std::span<const LabeledSentence> sentences,
                                     std::span<const double> probabilities, double threshold,
                                     std::size_t top_k) {
  if (sentences.size() != probabilities.size()) {
    throw Error(ErrorCode::LengthMismatch, "one probability per sentence required");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (probabilities[i] >= threshold) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return probabilities[a] > probabilities[b]; });
  if (idx.size() > top_k) idx.resize(top_k);
  std::vector<RankedRow> rows;
  for (auto i : idx) {
    const auto& s = sentences[i];
    rows.push_back({s.id, s.text, s.section_type, probabilities[i], s.label});
  }
  return rows;
}

std::string ranked_csv(const std::vector<RankedRow>& rows) {
  std::ostringstream out;
  out << "rank,id,section_type,probability,label,text\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    char p[32];
    std::snprintf(p, sizeof p, "%.17g", rows[r].probability);
    out << r + 1 << ',' << csv_field(rows[r].id) << ',' << csv_field(rows[r].section_type) << ','
        << p << ',' << (rows[r].label ? 1 : 0) << ',' << csv_field(rows[r].text) << '\n';
  }
  return out.str();
}

nlohmann::json ranked_json(const std::vector<RankedRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.push_back({{"rank", r + 1},
                   {"id", rows[r].id},
                   {"section_type", rows[r].section_type},
                   {"probability", rows[r].probability},
                   {"label", rows[r].label},
                   {"text", rows[r].text}});
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace citeworth::eval
