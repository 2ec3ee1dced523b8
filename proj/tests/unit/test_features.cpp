#include <doctest.h>

#include <cmath>

#include "citeworth/error.hpp"
#include "citeworth/features.hpp"
#include "support.hpp"

using namespace citeworth;
using namespace citeworth::features;

namespace {

std::vector<LabeledSentence> three_sentences() {
  return testing::document("d", {"Cells grow fast here.", "Cats purr.", "Prior work agrees with this."}, {0, 0, 1},
                           "methods");
}

}  // namespace

TEST_CASE("context bundles resolve neighbors within the pool") {
  const auto doc = three_sentences();
  ContextAssembler a(doc);
  const auto b = a.assemble(1);
  REQUIRE(b.prev_sentence.has_value());
  REQUIRE(b.next_sentence.has_value());
  CHECK(b.prev_sentence->id == "d#0");
  CHECK(b.next_sentence->id == "d#2");
  CHECK(b.section_type == "methods");
  CHECK_FALSE(a.assemble(0).prev_sentence.has_value());
  CHECK_THROWS_AS(a.assemble(3), Error);

  // examples drawn from a subset still see neighbors in the full pool
  const std::vector<LabeledSentence> only_middle = {doc[1]};
  const auto bundles = make_bundles(only_middle, doc);
  REQUIRE(bundles.size() == 1);
  CHECK(bundles[0].next_sentence->text == "Prior work agrees with this.");
  // without the pool the links dangle and are dropped
  const auto alone = make_bundles(only_middle, only_middle);
  CHECK_FALSE(alone[0].prev_sentence.has_value());
}

TEST_CASE("handcrafted features of a lone sentence") {
  ContextBundle b;
  b.cur_sentence = testing::sentence("x#0", "x", "Cats purr.", false);
  const auto h = handcrafted_features(b);
  CHECK(h.values() == std::array<double, 8>{0, 0, 10, 2, 0, 0, 0, 0});
}

TEST_CASE("neighbor flags follow the flag policy") {
  const auto doc = three_sentences();
  const auto b = assemble_context(doc, 1);
  const auto from_labels = handcrafted_features(b, FlagPolicy::FromLabels);
  CHECK(from_labels.prev_has_citation == 0);
  CHECK(from_labels.next_has_citation == 1);
  CHECK(from_labels.char_len_prev == 21);
  CHECK(from_labels.word_len_next == 5);
  CHECK(handcrafted_features(b, FlagPolicy::Zero).next_has_citation == 0);
}

TEST_CASE("cosine similarity") {
  const std::vector<double> a{1, 2}, b{2, 1}, z{0, 0};
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.8));
  CHECK(cosine_similarity(a, z) == 0.0);
  textrep::SparseVector s1{{0, 3}, {1.0, 2.0}, 5}, s2{{1, 3}, {4.0, 1.0}, 5};
  CHECK(cosine_similarity(s1, s2) == doctest::Approx(2.0 / (std::sqrt(5.0) * std::sqrt(17.0))));
}

TEST_CASE("z-score and max-abs scaling") {
  const std::vector<std::vector<double>> rows = {{1, -4, 7}, {2, 2, 7}, {3, 1, 7}};
  const auto s = fit_scaler(rows, {ScaleMode::ZScore, ScaleMode::MaxAbs, ScaleMode::ZScore});
  const auto out = apply_scaler(s, rows);
  CHECK(out[0][0] == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(out[1][0] == doctest::Approx(0.0));
  CHECK(out[2][0] == doctest::Approx(1.2247).epsilon(1e-4));
  CHECK(out[0][1] == doctest::Approx(-1.0));
  CHECK(out[1][1] == doctest::Approx(0.5));
  // a constant column passes through and is reported
  CHECK(out[1][2] == 7.0);
  CHECK(s.degenerate_columns() == std::vector<std::size_t>{2});
  const auto back = Scaler::from_json(s.to_json());
  CHECK(apply_scaler(back, rows) == out);
}

TEST_CASE("sparse scaler counts implicit zeros") {
  Eigen::SparseMatrix<double> X(4, 1);
  X.insert(0, 0) = 2.0;
  X.insert(1, 0) = 4.0;
  X.makeCompressed();
  const auto s = fit_scaler(X, {ScaleMode::ZScore});
  CHECK(s.mean(0) == doctest::Approx(1.5));
  CHECK(s.stddev(0) == doctest::Approx(std::sqrt((0.25 + 6.25 + 2.25 + 2.25) / 4.0)));
}

TEST_CASE("contextual pipeline layout and categories") {
  const auto doc = three_sentences();
  const auto bundles = make_bundles(doc, doc);
  FeatureConfig fc;
  fc.min_df = 1;
  const auto p = FeaturePipeline::fit(bundles, fc);
  const std::size_t v = p.sentence_vocabulary().size();
  // section vocabulary is the single term "methods"
  CHECK(p.dimension() == 1 + 3 * v + 10);
  const auto& cats = p.feature_categories();
  CHECK(cats.front() == "section");
  CHECK(cats[1] == "prev");
  CHECK(cats[1 + v] == "cur");
  CHECK(cats[1 + 2 * v] == "next");
  CHECK(p.feature_names().back() == "next_has_citation");
  CHECK(p.feature_names()[1 + 3 * v + 6] == "sim_prev_cur");

  const auto X = p.transform(bundles);
  CHECK(X.rows() == 3);
  CHECK(X.cols() == static_cast<long>(p.dimension()));
  for (int k = 0; k < X.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(X, k); it; ++it) CHECK(std::isfinite(it.value()));
  }

  fc.contextual = false;
  const auto q = FeaturePipeline::fit(bundles, fc);
  CHECK(q.dimension() == v + 2);
  CHECK(q.feature_names().back() == "word_len_cur");
}

TEST_CASE("pipeline JSON round trip gives identical rows") {
  const auto doc = three_sentences();
  const auto bundles = make_bundles(doc, doc);
  FeatureConfig fc;
  fc.min_df = 1;
  const auto p = FeaturePipeline::fit(bundles, fc);
  const auto back = FeaturePipeline::from_json(p.to_json());
  REQUIRE(back.dimension() == p.dimension());
  for (const auto& b : bundles) {
    const auto r1 = p.transform(b), r2 = back.transform(b);
    CHECK(r1.indices == r2.indices);
    CHECK(r1.values == r2.values);
  }
}

TEST_CASE("topic representation gives dense topic blocks") {
  const auto doc = three_sentences();
  const auto bundles = make_bundles(doc, doc);
  FeatureConfig fc;
  fc.min_df = 1;
  fc.representation = Representation::Topics;
  fc.lda.topics = 4;
  fc.lda.iterations = 20;
  fc.lda.burn_in = 5;
  fc.lda.sample_lag = 5;
  const auto p = FeaturePipeline::fit(bundles, fc);
  CHECK(p.dimension() == 4 * 4 + 10);
  CHECK(representation_from_string(to_string(Representation::Topics)) == Representation::Topics);
  CHECK_THROWS_AS(representation_from_string("words"), Error);
}

TEST_CASE("fitting on nothing is an error") {
  CHECK_THROWS_AS(FeaturePipeline::fit({}, FeatureConfig{}), Error);
}
