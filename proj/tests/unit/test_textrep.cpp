#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "citeworth/error.hpp"
#include "citeworth/textrep.hpp"
#include "support.hpp"

using namespace citeworth;
using namespace citeworth::textrep;

using Tokens = std::vector<std::string>;

TEST_CASE("tokenize lowercases, splits and folds numbers") {
  CHECK(tokenize("The p-value was 0.05, with 1,000 Cells.") ==
        Tokens{"the", "p", "value", "was", "<num>", "with", "<num>", "cells"});
  CHECK(tokenize("IL6 v1.2 Tárraga") == Tokens{"il6", "v1.2", "tárraga"});
  CHECK(tokenize("  ...  ").empty());
}

TEST_CASE("ngrams append adjacent bigrams after unigrams") {
  CHECK(ngrams({"a", "b", "c"}) == Tokens{"a", "b", "c", "a_b", "b_c"});
  CHECK(ngrams({"a"}) == Tokens{"a"});
  CHECK(ngrams({"a", "b"}, 1) == Tokens{"a", "b"});
}

TEST_CASE("vocabulary is sorted, thresholded by document frequency and order-free") {
  const std::vector<Tokens> docs = {{"b", "a", "a"}, {"a", "c"}, {"b", "a"}};
  const auto v = fit_vocab(docs, 2, 2);
  CHECK(v.terms() == Tokens{"a", "b", "b_a"});
  CHECK(v.document_frequency(*v.index_of("a")) == 3);
  CHECK(v.document_frequency(*v.index_of("b_a")) == 2);
  CHECK_FALSE(v.index_of("c").has_value());
  const auto v2 = fit_vocab({docs[2], docs[0], docs[1]}, 2, 2);
  CHECK(v2.hash() == v.hash());
  CHECK_THROWS_AS(fit_vocab(docs, 2, 10), Error);
  CHECK_THROWS_AS(fit_vocab({}, 2, 1), Error);
}

TEST_CASE("tf-idf weights follow the smoothed idf and are unit length") {
  const std::vector<Tokens> docs = {{"x", "y"}, {"x"}, {"z"}};
  const auto v = fit_vocab(docs, 1, 1);
  // idf = ln((1+N)/(1+df)) + 1
  const double idf_x = std::log(4.0 / 3.0) + 1.0;
  const double idf_y = std::log(4.0 / 2.0) + 1.0;
  CHECK(v.idf(*v.index_of("x")) == doctest::Approx(idf_x));
  const auto s = tfidf_transform({"x", "x", "y", "oov"}, v);
  REQUIRE(s.nnz() == 2);
  const double a = 2 * idf_x, b = idf_y, n = std::sqrt(a * a + b * b);
  CHECK(s.values[0] == doctest::Approx(a / n));
  CHECK(s.values[1] == doctest::Approx(b / n));
  CHECK(s.norm() == doctest::Approx(1.0));
  CHECK(s.dimension == 3);
  CHECK(tfidf_transform({"oov"}, v).nnz() == 0);
}

TEST_CASE("vocabulary survives a JSON round trip") {
  const auto v = fit_vocab({{"a", "b"}, {"b", "c"}}, 2, 1);
  const auto back = Vocabulary::from_json(v.to_json());
  CHECK(back.terms() == v.terms());
  CHECK(back.hash() == v.hash());
  CHECK(back.idf(1) == v.idf(1));
}

namespace {

std::vector<Tokens> two_topic_corpus() {
  std::vector<Tokens> docs;
  Rng rng(4);
  const Tokens a = {"gene", "protein", "cell", "dna"}, b = {"river", "water", "fish", "lake"};
  for (int d = 0; d < 40; ++d) {
    const auto& w = d % 2 ? a : b;
    Tokens doc;
    for (int i = 0; i < 12; ++i) doc.push_back(w[rng.uniform_index(w.size())]);
    docs.push_back(doc);
  }
  return docs;
}

}  // namespace

TEST_CASE("Gibbs sampler keeps one topic per token and is reproducible") {
  LdaConfig c;
  c.topics = 2;
  c.iterations = 60;
  c.burn_in = 20;
  c.sample_lag = 5;
  c.seed = 9;
  const auto docs = two_topic_corpus();
  bool counts_ok = true;
  const auto m = fit_lda(docs, c, [&](const GibbsDiagnostics& d) {
    counts_ok = counts_ok && d.assigned_tokens == d.corpus_tokens;
  });
  CHECK(counts_ok);
  CHECK(m.alpha == doctest::Approx(25.0));  // 50 / K
  for (const auto& row : m.phi) {
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
  }
  const auto m2 = fit_lda(docs, c);
  CHECK(m2.phi == m.phi);

  const auto th = infer_topics({"gene", "protein", "dna"}, m);
  CHECK(std::accumulate(th.begin(), th.end(), 0.0) == doctest::Approx(1.0));
  CHECK(infer_topics({"gene", "protein", "dna"}, m) == th);
  const auto uni = infer_topics({"unseen"}, m);
  CHECK(uni[0] == doctest::Approx(0.5));
  CHECK(uni[1] == doctest::Approx(0.5));
}

TEST_CASE("topic model survives a JSON round trip") {
  LdaConfig c;
  c.topics = 3;
  c.iterations = 20;
  c.burn_in = 5;
  c.sample_lag = 5;
  const auto m = fit_lda(two_topic_corpus(), c);
  const auto back = TopicModel::from_json(m.to_json());
  CHECK(back.vocabulary == m.vocabulary);
  CHECK(back.phi == m.phi);
  CHECK(infer_topics({"fish", "lake"}, back) == infer_topics({"fish", "lake"}, m));
}

TEST_CASE("embedding files: header skipped, ragged rows and missing files rejected") {
  const auto dir = testing::temp_dir("emb");
  const auto good = dir + "/good.txt";
  std::ofstream(good) << "2 3\nfoo 1 2 3\nbar 0.5 -1 0\nfoo 9 9 9\n";
  const auto t = load_embeddings(good);
  CHECK(t.dimension() == 3);
  CHECK(t.size() == 2);
  REQUIRE(t.lookup("foo").has_value());
  CHECK((*t.lookup("foo"))[2] == 3.0);
  CHECK_FALSE(t.lookup("baz").has_value());

  const auto ragged = dir + "/ragged.txt";
  std::ofstream(ragged) << "foo 1 2 3\nbar 1 2\n";
  try {
    load_embeddings(ragged);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  try {
    load_embeddings(dir + "/missing.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}
