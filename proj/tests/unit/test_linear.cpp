#include <doctest.h>

#include <cmath>
#include <numeric>

#include "citeworth/error.hpp"
#include "citeworth/linear.hpp"
#include "support.hpp"

using namespace citeworth;
using namespace citeworth::linear;

TEST_CASE("sigmoid is stable at the extremes") {
  CHECK(sigmoid(0) == 0.5);
  CHECK(sigmoid(800) == 1.0);
  CHECK(sigmoid(-800) == 0.0);
  CHECK(std::isfinite(sigmoid(-800)));
}

TEST_CASE("lambda at twice the critical value zeroes every coefficient") {
  const auto d = testing::logistic_data(60, 8, 3, 1.0);
  const double lmax = lambda_max(d.X, d.y, 1.0);
  CHECK(lmax > 0);
  EnlrParams p;
  p.alpha = 1.0;
  p.lambda = 2 * lmax;
  const auto m = fit_enlr(d.X, d.y, p);
  CHECK(m.beta.cwiseAbs().maxCoeff() == 0.0);
  // just below the critical value something becomes active
  p.lambda = 0.9 * lmax;
  CHECK(fit_enlr(d.X, d.y, p).beta.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("unpenalized fit matches gradient descent") {
  const auto d = testing::logistic_data(20, 5, 17);
  double gnorm = 0;
  const auto ref = testing::gradient_descent_logistic(d, 200000, gnorm);
  REQUIRE(gnorm < 1e-9);
  EnlrParams p;
  p.lambda = 0.0;
  p.tolerance = 1e-12;
  p.max_sweeps = 100000;
  const auto m = fit_enlr(d.X, d.y, p);
  CHECK(std::abs(m.intercept - ref[0]) < 1e-4);
  for (int j = 0; j < 5; ++j) {
    CAPTURE(j);
    CHECK(std::abs(m.beta[j] - ref[static_cast<std::size_t>(j) + 1]) < 1e-4);
  }
}

TEST_CASE("objective never increases across sweeps") {
  const auto d = testing::logistic_data(150, 12, 8, 1.0);
  for (double alpha : {0.0, 0.5, 1.0}) {
    EnlrParams p;
    p.alpha = alpha;
    p.lambda = 0.02 * std::max(lambda_max(d.X, d.y, alpha), 1e-3);
    std::vector<double> trace;
    const auto m = fit_enlr(d.X, d.y, p, nullptr, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
    CHECK(enlr_objective(m, d.X, d.y) == doctest::Approx(trace.back()));
  }
}

TEST_CASE("bad inputs are rejected") {
  const auto d = testing::logistic_data(10, 3, 1);
  std::vector<int> one_class(10, 1);
  CHECK_THROWS_AS(fit_enlr(d.X, one_class, {}), Error);
  std::vector<int> short_y(3, 0);
  CHECK_THROWS_AS(fit_enlr(d.X, short_y, {}), Error);
  EnlrParams bad;
  bad.alpha = 2;
  CHECK_THROWS_AS(fit_enlr(d.X, d.y, bad), Error);
  try {
    fit_enlr(d.X, one_class, {});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClass);
  }
}

TEST_CASE("stratified folds keep class balance") {
  std::vector<int> y(50, 0);
  for (int i = 0; i < 10; ++i) y[static_cast<std::size_t>(i) * 5] = 1;
  const auto f = stratified_folds(y, 5, 2);
  std::vector<int> pos(5, 0), all(5, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    ++all[f[i]];
    pos[f[i]] += y[i];
  }
  for (int k = 0; k < 5; ++k) {
    CHECK(pos[static_cast<std::size_t>(k)] == 2);
    CHECK(all[static_cast<std::size_t>(k)] == 10);
  }
  CHECK(stratified_folds(y, 5, 2) == f);
}

TEST_CASE("cross-validation picks a grid point and refits") {
  const auto d = testing::logistic_data(120, 6, 4, 2.0);
  EnlrCvConfig c;
  c.alpha_grid = {0.5, 1.0};
  c.lambda_ratios = {1.0, 0.1, 0.01};
  c.folds = 3;
  CvResult r;
  const auto m = train_enlr(d.X, d.y, c, &r);
  CHECK(r.grid.size() == 6);
  CHECK(m.alpha == r.best.alpha);
  CHECK(m.lambda == r.best.lambda);
  for (const auto& g : r.grid) CHECK(g.mean_f1 <= r.best.mean_f1);
  const auto probs = predict_enlr(m, d.X);
  CHECK(probs.size() == 120);
  std::vector<double> row(6, 0.0);
  CHECK(predict_enlr(m, row) == doctest::Approx(sigmoid(m.intercept)));
  std::vector<double> wrong(5, 0.0);
  CHECK_THROWS_AS(predict_enlr(m, wrong), Error);
}

TEST_CASE("forest importances are normalized") {
  const auto d = testing::logistic_data(200, 10, 6, 1.5);
  RfParams p;
  p.trees = 20;
  p.seed = 1;
  p.threads = 1;
  const auto m = train_rf(d.X, d.y, p);
  const double s = std::accumulate(m.importances.begin(), m.importances.end(), 0.0);
  CHECK(std::abs(s - 1.0) < 1e-9);
  for (double v : m.importances) CHECK(v >= 0);
  CHECK(rf_importances(m.trees, 10) == m.importances);
}

TEST_CASE("a single full tree memorizes consistent data") {
  const auto d = testing::logistic_data(150, 6, 12, 0.1);
  RfParams p;
  p.trees = 1;
  p.max_features = 6;
  p.bootstrap = false;
  const auto m = train_rf(d.X, d.y, p);
  const auto probs = predict_rf(m, d.X);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) correct += (rf_decision(probs[i]) ? 1 : 0) == d.y[i];
  CHECK(correct == probs.size());
}

TEST_CASE("forest learns XOR with noise columns") {
  const auto train = testing::xor4_data(400, 21);
  const auto test = testing::xor4_data(400, 22);
  RfParams p;
  p.trees = 100;
  p.seed = 5;
  p.threads = 1;
  const auto m = train_rf(train.X, train.y, p);
  const auto probs = predict_rf(m, test.X);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) correct += (rf_decision(probs[i]) ? 1 : 0) == test.y[i];
  CHECK(static_cast<double>(correct) / 400.0 >= 0.95);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const std::vector<double> x{double(a), double(b), 0.5, 0.5};
      CHECK(rf_decision(predict_rf(m, x)) == static_cast<bool>(a ^ b));
    }
  }
}

TEST_CASE("forest training is reproducible and thread-count independent") {
  const auto d = testing::logistic_data(100, 5, 2, 1.0);
  RfParams p;
  p.trees = 10;
  p.seed = 3;
  p.threads = 1;
  const auto a = train_rf(d.X, d.y, p);
  p.threads = 3;
  const auto b = train_rf(d.X, d.y, p);
  CHECK(predict_rf(a, d.X) == predict_rf(b, d.X));
  CHECK(a.importances == b.importances);
}

TEST_CASE("importance report carries regression signs and category sums") {
  const auto d = testing::logistic_data(300, 4, 9, 2.0);
  RfParams rp;
  rp.trees = 15;
  rp.threads = 1;
  const auto rf = train_rf(d.X, d.y, rp);
  EnlrParams ep;
  ep.lambda = 0.0;
  const auto enlr = fit_enlr(d.X, d.y, ep);
  const std::vector<std::string> names{"cur:a", "cur:b", "prev:c", "char_len_cur"};
  const std::vector<std::string> cats{"cur", "cur", "prev", "char_len_cur"};
  const auto r = importance_report(rf, enlr, names, cats);
  REQUIRE(r.features.size() == 4);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(r.features[j].importance == rf.importances[j]);
    CHECK(r.features[j].sign == (enlr.beta[static_cast<Eigen::Index>(j)] > 0   ? 1
                                 : enlr.beta[static_cast<Eigen::Index>(j)] < 0 ? -1
                                                                                : 0));
  }
  REQUIRE(r.categories.size() == 3);
  CHECK(r.categories[0].category == "cur");
  CHECK(r.categories[0].members == 2);
  CHECK(r.categories[0].importance == doctest::Approx(rf.importances[0] + rf.importances[1]));
  const auto top = top_features(r, "cur", 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].importance == std::max(rf.importances[0], rf.importances[1]));
  CHECK_THROWS_AS(importance_report(rf, enlr, {"x"}, {"x"}), Error);
}
