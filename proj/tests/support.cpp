#include "support.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>

#include <Eigen/Dense>

#include "citeworth/rng.hpp"
#include "citeworth/text_util.hpp"

namespace testing {

namespace fs = std::filesystem;
using namespace citeworth;

std::string fixture_path(const std::string& relative) {
  return (fs::path(CITEWORTH_FIXTURES) / relative).string();
}

std::vector<corpus::ArticleTree> fixture_articles() {
  std::vector<corpus::ArticleTree> out;
  for (const auto& f : corpus::list_article_files(fixture_path("jats"))) {
    out.push_back(corpus::parse_article(corpus::read_maybe_gzip(f), f.stem().string()));
  }
  return out;
}

LabeledSentence sentence(const std::string& id, const std::string& article, const std::string& text,
                         bool label, const std::string& section) {
  LabeledSentence s;
  s.id = id;
  s.article_id = article;
  s.text = text;
  s.label = label;
  s.section_type = section;
  s.char_len = char_length(text);
  s.word_len = word_length(text);
  return s;
}

std::vector<LabeledSentence> document(const std::string& article, const std::vector<std::string>& texts,
                                      const std::vector<int>& labels, const std::string& section) {
  std::vector<LabeledSentence> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back(sentence(article + "#" + std::to_string(i), article, texts[i], labels[i] != 0, section));
  }
  corpus::link_neighbors(out, corpus::NeighborScope::Document);
  return out;
}

namespace {

const std::vector<std::string>& filler() {
  static const std::vector<std::string> words = {
      "cells",   "were",   "grown",  "in",     "medium", "the",      "samples", "showed",
      "a",       "strong", "signal", "after",  "two",    "days",     "we",      "measured",
      "protein", "levels", "using",  "standard", "assays", "results", "indicate", "that",
      "growth",  "rates",  "differ", "between", "groups", "of",      "mice",    "treated"};
  return words;
}

std::string random_text(Rng& rng, std::size_t min_words, std::size_t max_words) {
  const auto& w = filler();
  const std::size_t n = min_words + rng.uniform_index(max_words - min_words + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += w[rng.uniform_index(w.size())];
  }
  return s + ".";
}

}  // namespace

std::vector<LabeledSentence> separable_set(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledSentence> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool label = i % 2 == 0;
    std::string text = random_text(rng, 4, 8);
    if (label) {
      // insert the marker word at a random word boundary
      std::vector<std::size_t> gaps{0};
      for (std::size_t k = 0; k < text.size(); ++k) {
        if (text[k] == ' ') gaps.push_back(k + 1);
      }
      text.insert(gaps[rng.uniform_index(gaps.size())], "previously ");
    }
    const std::string article = "sep" + std::to_string(i);
    out.push_back(sentence(article + "#0", article, text, label));
  }
  return out;
}

std::vector<LabeledSentence> neighbor_signal_set(std::size_t documents, std::size_t per_document,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledSentence> out;
  for (std::size_t d = 0; d < documents; ++d) {
    std::vector<std::string> texts;
    std::vector<int> labels;
    for (std::size_t i = 0; i < per_document; ++i) {
      texts.push_back(random_text(rng, 5, 9));
      labels.push_back(i % 3 == 1 ? 1 : 0);
    }
    auto doc = document("doc" + std::to_string(seed) + "_" + std::to_string(d), texts, labels);
    out.insert(out.end(), doc.begin(), doc.end());
  }
  return out;
}

namespace {

const std::vector<std::string> kTinyWords = {"alpha", "beta",  "gamma", "delta", "eps",
                                             "zeta",  "eta",   "theta", "iota",  "kappa"};

}  // namespace

std::vector<ContextBundle> tiny_batch() {
  const auto& w = kTinyWords;
  auto doc = document("tiny",
                      {w[0] + " " + w[1] + " " + w[2], w[3] + " " + w[4], w[5] + " " + w[6] + " " + w[7] + " " + w[8],
                       w[9] + " " + w[0] + " " + w[4], w[2] + " " + w[7]},
                      {0, 1, 0, 1, 1}, "kappa");
  return features::make_bundles(doc, doc);
}

neural::NeuralModel tiny_model(neural::AttentionVariant variant, bool contextual, std::uint64_t seed) {
  neural::NeuralConfig c;
  c.char_embedding_dim = 3;
  c.char_hidden = 3;
  c.word_dim = 4;
  c.hidden = 4;
  c.mlp_hidden = 5;
  c.attention = variant;
  c.contextual = contextual;
  c.seed = seed;
  auto m = neural::init_model(c, tiny_batch());
  // Larger weights than the default init so every gradient is well above
  // finite-difference noise.
  Rng rng(seed + 1);
  for (auto& t : m.params.tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) t.data[i] = rng.uniform(-0.8, 0.8);
  }
  return m;
}

corpus::CorpusSplit fixture_split() {
  corpus::BuildConfig bc;
  bc.seed = 3;
  return corpus::build_dataset(fixture_articles(), bc);
}

std::string temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto base = fs::temp_directory_path() /
                    ("citeworth_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::create_directories(base);
  return base.string();
}

}  // namespace testing

namespace testing {

const std::vector<std::string>& hint_examples() {
  static const std::vector<std::string> v = {
      // numeric
      "[1, 2]", "[ 1- 2]", "(1-3)", "(1,2,3)", "[1-3, 5]", "[8],[9],[12]", "( 1-2; 4-6; 8 )",
      // parenthetical author-year
      "(Kim and li, 2008)", "(Heijman , 2013b)", "(Tárraga , 2006; Capella-Gutiérrez , 2009)",
      "(Kobayashi et al., 2005)", "(Richart and Barron, 1969; Campion et al, 1986)",
      "(Nasiell et al, 1983, 1986)",
      // et al.
      "et al.", "et al. 2008", "et al. (2008)"};
  return v;
}

const std::vector<std::string>& preserved_parentheticals() {
  static const std::vector<std::string> v = {
      "(see Methods)",    "(Figure 2A)",     "(p < 0.05)",          "(n = 12)",
      "(Table 1)",        "(mean ± SD)",     "(95% CI 1.2-3.4)",    "(data not shown)",
      "(arrow)",          "(Supplementary Fig. S3)", "(i)",         "(ii)",
      "(IL-6)",           "(pH 7.4)",        "(10 mg/kg)",          "(30 min)",
      "(approximately 20%)", "(WT)",         "(left panel)",        "(Smith's method)"};
  return v;
}

namespace {

struct Expected {
  std::string id;
  int label;
  std::string section;
  std::string text;  // empty: not checked
  std::string prev, next;
};

}  // namespace

std::vector<std::string> fixture_corpus_mismatches() {
  const std::vector<Expected> expected = {
      {"PMC1001#0", 0, "abstract", "Cell migration is central to wound healing.", "", "PMC1001#1"},
      {"PMC1001#1", 0, "abstract", "We study it here in detail.", "PMC1001#0", "PMC1001#2"},
      {"PMC1001#2", 1, "intro", "Prior work showed that fibroblasts respond to stiffness .", "PMC1001#1",
       "PMC1001#3"},
      {"PMC1001#3", 0, "intro", "The mechanism remains poorly understood in vivo.", "PMC1001#2", "PMC1001#4"},
      {"PMC1001#4", 1, "intro", "Smith proposed a model based on focal adhesions.", "PMC1001#3", "PMC1001#6"},
      {"PMC1001#6", 0, "Methods", "Cells were cultured in standard medium for three days.", "PMC1001#4",
       "PMC1001#7"},
      {"PMC1001#7", 0, "Methods", "Images were acquired every ten minutes.", "PMC1001#6", ""},
      {"PMC1002#0", 0, "results", "Cats do eat fishes.", "", "PMC1002#2"},
      {"PMC1002#2", 0, "results", "Extraordinarily long sentences.", "PMC1002#0", "PMC1002#4"},
      {"PMC1002#4", 0, "results", "", "PMC1002#2", "PMC1002#6"},
      {"PMC1002#6", 0, "results", "", "PMC1002#4", "PMC1002#8"},
      {"PMC1002#8", 0, "results", "Results were consistent across all replicates", "PMC1002#6", ""},
      {"PMC1003#0", 1, "methods", "Statistical analysis used a two-sided t-test .", "", "PMC1003#1"},
      {"PMC1003#1", 0, "methods", "All tests were performed at the five percent level.", "PMC1003#0",
       "PMC1003#2"},
      {"PMC1003#2", 1, "Discussion", "Our results agree with earlier reports .", "PMC1003#1", "PMC1003#3"},
      {"PMC1003#3", 0, "Discussion", "Further work is needed to confirm this finding.", "PMC1003#2",
       "PMC1003#4"},
      {"PMC1003#4", 1, "Discussion", "This is consistent with previous observations .", "PMC1003#3", ""},
  };

  std::vector<LabeledSentence> got;
  for (const auto& a : fixture_articles()) {
    auto s = corpus::label_article(a, corpus::LengthBounds{}, corpus::NeighborScope::Document);
    got.insert(got.end(), s.begin(), s.end());
  }

  std::vector<std::string> bad;
  if (got.size() != expected.size()) {
    bad.push_back("sentence count " + std::to_string(got.size()) + " != " + std::to_string(expected.size()));
    return bad;
  }
  auto opt = [](const std::optional<std::string>& o) { return o ? *o : std::string(); };
  for (std::size_t i = 0; i < got.size(); ++i) {
    const auto& g = got[i];
    const auto& e = expected[i];
    const std::string where = e.id + ": ";
    if (g.id != e.id) bad.push_back(where + "id " + g.id);
    if (static_cast<int>(g.label) != e.label) bad.push_back(where + "label");
    if (g.section_type != e.section) bad.push_back(where + "section " + g.section_type);
    if (!e.text.empty() && g.text != e.text) bad.push_back(where + "text '" + g.text + "'");
    if (opt(g.prev_id) != e.prev) bad.push_back(where + "prev " + opt(g.prev_id));
    if (opt(g.next_id) != e.next) bad.push_back(where + "next " + opt(g.next_id));
    // neighbor flags must agree with the neighbors' labels
    auto label_of = [&](const std::string& id) {
      for (const auto& x : expected) {
        if (x.id == id) return x.label != 0;
      }
      return false;
    };
    if (g.prev_has_citation != (!e.prev.empty() && label_of(e.prev))) bad.push_back(where + "prev flag");
    if (g.next_has_citation != (!e.next.empty() && label_of(e.next))) bad.push_back(where + "next flag");
    if (g.char_len != char_length(g.text) || g.word_len != word_length(g.text)) bad.push_back(where + "lengths");
  }

  // boundary sentences: 19 chars and 3 words kept, 18 chars and 2 words dropped,
  // 42 words / 275 chars kept, 43 words / 276 chars dropped
  const auto& b = got;
  auto find = [&](const std::string& id) {
    for (const auto& s : b) {
      if (s.id == id) return &s;
    }
    return static_cast<const LabeledSentence*>(nullptr);
  };
  if (auto* s = find("PMC1002#0"); !s || s->char_len != 19) bad.push_back("19-char sentence not kept");
  if (auto* s = find("PMC1002#2"); !s || s->word_len != 3) bad.push_back("3-word sentence not kept");
  if (auto* s = find("PMC1002#4"); !s || s->word_len != 42) bad.push_back("42-word sentence not kept");
  if (auto* s = find("PMC1002#6"); !s || s->char_len != 275) bad.push_back("275-char sentence not kept");
  for (const char* dropped : {"PMC1001#5", "PMC1002#1", "PMC1002#3", "PMC1002#5", "PMC1002#7", "PMC1002#9"}) {
    if (find(dropped)) bad.push_back(std::string(dropped) + " should have been dropped");
  }

  // excluded containers never contribute text
  for (const auto& s : got) {
    if (s.text.find("caption") != std::string::npos || s.text.find("reference entry") != std::string::npos) {
      bad.push_back(s.id + ": text from an excluded container");
    }
  }

  const auto st = corpus::corpus_stats(got);
  if (st.articles != 3 || st.sections != 6 || st.paragraphs != 10 || st.sentences != 17 || st.citing != 5 ||
      st.non_citing != 12) {
    bad.push_back("stats totals");
  }
  return bad;
}

std::vector<std::string> fuzz_sentences(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> pieces = {
      "cells", "were", "Smith", "et", "al.", "al", "(", ")", "[", "]", "2008", "1986b", "19", "3",
      "1-3", ",", ";", "and", "(see", "Methods)", "et al.", "[1]", "(Kim, 2001)", "p", "<", "0.05",
      "Fig.", "2A", "–", "—", "\xC2\xA0", "Tárraga", "((", "))", "[[", "]]", "et al. (2008)", "n", "=",
      "12", ".", "e.g.", "in", "vivo", "1999", "2105", "(i)"};
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = 1 + rng.uniform_index(25);
    std::string s;
    for (std::size_t j = 0; j < k; ++j) {
      if (j && rng.uniform() < 0.7) s += ' ';
      s += pieces[rng.uniform_index(pieces.size())];
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace testing

namespace testing {

namespace {

Eigen::SparseMatrix<double> to_sparse(const Eigen::MatrixXd& D) {
  Eigen::SparseMatrix<double> X = D.sparseView(0.0, 0.0);
  X.makeCompressed();
  return X;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Dataset logistic_data(std::size_t rows, std::size_t cols, std::uint64_t seed, double weight_scale) {
  Rng rng(seed);
  Eigen::MatrixXd D(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) D(i, j) = rng.normal();
  }
  Eigen::VectorXd w(cols);
  for (std::size_t j = 0; j < cols; ++j) w[j] = weight_scale * rng.normal();
  Dataset d;
  d.X = to_sparse(D);
  for (std::size_t i = 0; i < rows; ++i) {
    d.y.push_back(rng.uniform() < logistic(D.row(i).dot(w)) ? 1 : 0);
  }
  // both classes are required
  d.y[0] = 1;
  d.y[1] = 0;
  return d;
}

Dataset xor4_data(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd D(rows, 4);
  Dataset d;
  for (std::size_t i = 0; i < rows; ++i) {
    const int a = static_cast<int>(rng.uniform_index(2)), b = static_cast<int>(rng.uniform_index(2));
    D(i, 0) = a;
    D(i, 1) = b;
    D(i, 2) = rng.uniform();
    D(i, 3) = rng.uniform();
    d.y.push_back(a ^ b);
  }
  d.X = to_sparse(D);
  return d;
}

std::vector<double> gradient_descent_logistic(const Dataset& d, std::size_t iterations, double& gradient_norm) {
  const Eigen::MatrixXd X = Eigen::MatrixXd(d.X);
  const auto n = X.rows(), p = X.cols();
  Eigen::MatrixXd A(n, p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = d.y[static_cast<std::size_t>(i)];
  // step 1/L with L the curvature bound of the mean logistic loss
  const double L = (A.transpose() * A).eval().operatorNorm() / (4.0 * static_cast<double>(n));
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  Eigen::VectorXd g(p + 1);
  for (std::size_t it = 0; it < iterations; ++it) {
    Eigen::VectorXd r = (A * theta).unaryExpr([](double z) { return logistic(z); }) - y;
    g = A.transpose() * r / static_cast<double>(n);
    theta -= g / L;
  }
  gradient_norm = g.norm();
  return {theta.data(), theta.data() + theta.size()};
}

}  // namespace testing

namespace testing {

namespace {

std::vector<LabeledSentence> synthetic_part(const std::string& tag, std::size_t pos, std::size_t neg, Rng& rng) {
  std::vector<int> labels(pos, 1);
  labels.insert(labels.end(), neg, 0);
  rng.shuffle(labels);
  std::vector<LabeledSentence> out;
  for (std::size_t start = 0; start < labels.size(); start += 10) {
    std::vector<std::string> texts;
    std::vector<int> lab;
    for (std::size_t i = start; i < std::min(labels.size(), start + 10); ++i) {
      std::string t = random_text(rng, 4, 9);
      if (labels[i]) t = "As shown previously " + t;
      texts.push_back(t);
      lab.push_back(labels[i]);
    }
    auto doc = document(tag + std::to_string(start / 10), texts, lab);
    out.insert(out.end(), doc.begin(), doc.end());
  }
  return out;
}

}  // namespace

corpus::CorpusSplit synthetic_split(std::size_t train_pos, std::size_t train_neg, std::size_t valid_pos,
                                    std::size_t valid_neg, std::size_t test_pos, std::size_t test_neg,
                                    std::uint64_t seed) {
  Rng rng(seed);
  corpus::CorpusSplit s;
  s.seed = seed;
  s.train = synthetic_part("tr" + std::to_string(seed) + "_", train_pos, train_neg, rng);
  s.validation = synthetic_part("va" + std::to_string(seed) + "_", valid_pos, valid_neg, rng);
  s.test = synthetic_part("te" + std::to_string(seed) + "_", test_pos, test_neg, rng);
  return s;
}

}  // namespace testing

namespace testing {

cli::TrainOptions quick_options(model::Family family) {
  cli::TrainOptions o;
  o.family = family;
  o.min_df = 1;
  o.alpha = 1.0;
  o.lambda = 0.01;
  o.trees = 10;
  o.threads = 1;
  o.word_dim = 8;
  o.hidden = 4;
  o.char_dim = 3;
  o.char_hidden = 3;
  o.mlp_hidden = 6;
  o.epochs = 3;
  o.batch_size = 16;
  o.seed = 4;
  return o;
}

model::Classifier quick_model(model::Family family, std::uint64_t seed) {
  const auto split = synthetic_split(30, 90, 5, 15, 10, 30, seed);
  return cli::train_classifier(quick_options(family), {split.train, split.train},
                               {split.validation, split.validation});
}

}  // namespace testing
