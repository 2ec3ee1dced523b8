// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "citeworth/cli.hpp"
#include "citeworth/corpus.hpp"
#include "citeworth/dataset_io.hpp"
#include "citeworth/eval.hpp"
#include "citeworth/linear.hpp"
#include "citeworth/neural.hpp"
#include "citeworth/service.hpp"
#include "citeworth/text_util.hpp"
#include "support.hpp"

using namespace citeworth;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

int failures = 0;

void criterion(const char* name, double budget_seconds, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_seconds > 0) {
    char b[64];
    std::snprintf(b, sizeof b, "took %.2fs, budget %.0fs", secs, budget_seconds);
    o.require(secs <= budget_seconds, b);
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %.2fs%s%s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.empty() ? "" : "  ",
              o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

// -- metric oracle ----------------------------------------------------------

void metric_oracle(Outcome& o) {
  const double rows[][3] = {{0.196, 0.269, 0.227}, {0.171, 0.317, 0.222}, {0.182, 0.260, 0.214},
                            {0.418, 0.409, 0.413}, {0.449, 0.406, 0.426}, {0.766, 0.340, 0.471},
                            {0.711, 0.380, 0.495}, {0.720, 0.391, 0.507}, {0.900, 0.764, 0.827},
                            {0.886, 0.788, 0.834}, {0.883, 0.795, 0.837}, {0.907, 0.797, 0.848},
                            {0.908, 0.807, 0.854}, {0.907, 0.811, 0.856}};
  for (const auto& r : rows) {
    const auto m = eval::prf1(eval::synthetic_counts(r[0], r[1]));
    o.require(std::abs(m.f1 - r[2]) <= 0.001, "F1 " + fmt(m.f1) + " vs " + fmt(r[2]));
  }
}

// -- hint regexes ----------------------------------------------------------

void regex_suite(Outcome& o) {
  for (const auto& h : testing::hint_examples()) {
    const auto s = corpus::strip_citation_hints("Prior work " + h + " shows this.");
    o.require(normalize_space(s) == "Prior work shows this.", "not removed: " + h);
  }
  for (const auto& p : testing::preserved_parentheticals()) {
    const std::string s = "Cells were counted " + p + " twice.";
    o.require(corpus::strip_citation_hints(s) == s, "altered: " + p);
  }
  o.require(testing::preserved_parentheticals().size() == 20, "preserved suite size");
  std::size_t bad = 0;
  for (const auto& s : testing::fuzz_sentences(10000, 2024)) {
    const auto once = corpus::strip_citation_hints(s);
    if (corpus::strip_citation_hints(once) != once) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " fuzz sentences not idempotent");
}

// -- corpus golden ---------------------------------------------------------

void corpus_golden(Outcome& o) {
  for (const auto& m : testing::fixture_corpus_mismatches()) o.require(false, m);
}

// -- gradients -------------------------------------------------------------

constexpr neural::AttentionVariant kVariants[] = {neural::AttentionVariant::Cos, neural::AttentionVariant::Dp,
                                                  neural::AttentionVariant::Sdp};

void gradient_gate(Outcome& o) {
  const auto batch = testing::tiny_batch();
  for (auto v : kVariants) {
    const auto m = testing::tiny_model(v, true);
    o.require(m.config.hidden == 4 && m.config.char_hidden == 3 && m.words.size() == 10, "tiny model shape");
    neural::GradCheckOptions gc;
    // 1e-5 puts coordinates with |g| ~ 1e-7 on the rounding floor of the loss
    gc.epsilon = 1e-4;
    gc.samples_per_group = 200;
    const auto r = neural::grad_check(m, batch, gc);
    for (const auto& g : r.groups) {
      o.require(g.max_relative_error < 1e-4,
                std::string(neural::to_string(v)) + " " + g.group + " " + fmt(g.max_relative_error));
    }
    gc.corrupt_group = "enc_fwd.Wx";
    gc.samples_per_group = 20;
    const auto c = neural::grad_check(m, batch, gc);
    o.require(c.max_relative_error > 1e-1, "flipped gradient missed under " + std::string(neural::to_string(v)));
  }
}

// -- attention identities --------------------------------------------------

void attention_identities(Outcome& o) {
  Rng rng(77);
  auto vec = [&](Eigen::Index n) {
    neural::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal() * 3;
    return v;
  };
  std::size_t bitwise = 0, cos_self = 0, sums = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + rng.uniform_index(12));
    const auto d = static_cast<Eigen::Index>(1 + rng.uniform_index(8));
    const auto q = vec(d), k = vec(d);
    const double dp = neural::attention_score(q, k, neural::AttentionVariant::Dp, 1.0);
    const double sdp = neural::attention_score(q, k, neural::AttentionVariant::Sdp, 1.0);
    if (std::memcmp(&dp, &sdp, sizeof dp) != 0) ++bitwise;
    if (std::abs(neural::attention_score(q, q, neural::AttentionVariant::Cos, 0) - 1.0) > 1e-12) ++cos_self;
    neural::MatrixXd H(n, d);
    for (Eigen::Index i = 0; i < n; ++i) H.row(i) = vec(d).transpose();
    for (auto v : kVariants) {
      const auto out = neural::attention_pool(H, q, v);
      if (std::abs(out.alpha.sum() - 1.0) > 1e-9 || out.alpha.minCoeff() < 0) ++sums;
    }
  }
  o.require(bitwise == 0, std::to_string(bitwise) + " sdp/dp mismatches");
  o.require(cos_self == 0, std::to_string(cos_self) + " cos(q,q) != 1");
  o.require(sums == 0, std::to_string(sums) + " weight vectors off the simplex");
}

// -- neural training -------------------------------------------------------

neural::NeuralConfig small_config(bool contextual) {
  neural::NeuralConfig c;
  c.char_embedding_dim = 8;
  c.char_hidden = 8;
  c.word_dim = 16;
  c.hidden = 8;
  c.mlp_hidden = 16;
  c.contextual = contextual;
  return c;
}

void neural_overfit(Outcome& o) {
  const auto s = testing::separable_set(200, 11);
  const auto b = features::make_bundles(s, s);
  auto m = neural::init_model(small_config(false), b);
  neural::TrainConfig tc;
  tc.max_epochs = 30;
  tc.patience = 30;
  neural::train(m, tc, b, b);
  const double f1 = eval::prf1(eval::decide(neural::predict_proba(b, m), 0.5), eval::labels_of(s)).f1;
  o.require(f1 >= 0.95, "training F1 " + fmt(f1));

  const auto tr = testing::neighbor_signal_set(40, 9, 1), va = testing::neighbor_signal_set(10, 9, 2),
             te = testing::neighbor_signal_set(20, 9, 3);
  const auto btr = features::make_bundles(tr, tr), bva = features::make_bundles(va, va),
             bte = features::make_bundles(te, te);
  double f[2];
  for (int ctx = 0; ctx < 2; ++ctx) {
    auto mm = neural::init_model(small_config(ctx == 1), btr);
    neural::TrainConfig t2;
    t2.max_epochs = 30;
    neural::train(mm, t2, btr, bva);
    f[ctx] = eval::prf1(eval::decide(neural::predict_proba(bte, mm), 0.5), eval::labels_of(te)).f1;
  }
  o.require(f[1] - f[0] >= 0.2, "contextual " + fmt(f[1]) + " vs plain " + fmt(f[0]));
}

// -- elastic net -----------------------------------------------------------

void enlr_oracles(Outcome& o) {
  const auto d = testing::logistic_data(60, 8, 3, 1.0);
  linear::EnlrParams p;
  p.alpha = 1.0;
  p.lambda = 2 * linear::lambda_max(d.X, d.y, 1.0);
  o.require(linear::fit_enlr(d.X, d.y, p).beta.cwiseAbs().maxCoeff() == 0.0, "coefficients survive 2*lambda_max");

  const auto small = testing::logistic_data(20, 5, 17);
  double gnorm = 0;
  const auto ref = testing::gradient_descent_logistic(small, 200000, gnorm);
  o.require(gnorm < 1e-9, "oracle did not converge");
  linear::EnlrParams z;
  z.lambda = 0;
  z.tolerance = 1e-12;
  z.max_sweeps = 100000;
  const auto m = linear::fit_enlr(small.X, small.y, z);
  double worst = std::abs(m.intercept - ref[0]);
  for (int j = 0; j < 5; ++j) worst = std::max(worst, std::abs(m.beta[j] - ref[static_cast<std::size_t>(j) + 1]));
  o.require(worst < 1e-4, "max coefficient gap " + fmt(worst));

  const auto big = testing::logistic_data(150, 12, 8, 1.0);
  for (double alpha : {0.0, 0.5, 1.0}) {
    linear::EnlrParams q;
    q.alpha = alpha;
    q.lambda = 0.02 * std::max(linear::lambda_max(big.X, big.y, alpha), 1e-3);
    std::vector<double> trace;
    linear::fit_enlr(big.X, big.y, q, nullptr, &trace);
    for (std::size_t i = 1; i < trace.size(); ++i) {
      if (trace[i] > trace[i - 1] + 1e-12) {
        o.require(false, "objective rose at sweep " + std::to_string(i) + " (alpha " + fmt(alpha) + ")");
        break;
      }
    }
  }
}

// -- random forest ---------------------------------------------------------

void rf_oracles(Outcome& o) {
  const auto d = testing::logistic_data(200, 10, 6, 1.5);
  linear::RfParams p;
  p.trees = 30;
  p.threads = 1;
  const auto m = linear::train_rf(d.X, d.y, p);
  const double s = std::accumulate(m.importances.begin(), m.importances.end(), 0.0);
  o.require(std::abs(s - 1.0) <= 1e-9, "importances sum to " + fmt(s));

  linear::RfParams one;
  one.trees = 1;
  one.max_features = 10;
  one.bootstrap = false;
  const auto t = linear::train_rf(d.X, d.y, one);
  const auto probs = linear::predict_rf(t, d.X);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) wrong += linear::rf_decision(probs[i]) != (d.y[i] == 1);
  o.require(wrong == 0, std::to_string(wrong) + " training errors for a single full tree");

  const auto tr = testing::xor4_data(400, 21), te = testing::xor4_data(400, 22);
  linear::RfParams x;
  x.trees = 100;
  x.threads = 1;
  x.seed = 5;
  const auto f = linear::train_rf(tr.X, tr.y, x);
  const auto px = linear::predict_rf(f, te.X);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < px.size(); ++i) ok += linear::rf_decision(px[i]) == (te.y[i] == 1);
  o.require(ok >= 380, "XOR held-out accuracy " + fmt(static_cast<double>(ok) / 400.0));
}

// -- down-sampling ---------------------------------------------------------

void downsampling(Outcome& o) {
  const auto split = testing::synthetic_split(60, 500, 10, 80, 25, 200, 12);
  const double ratios[] = {1, 2, 3, 4.13};
  std::vector<std::size_t> test_sizes;
  std::vector<double> test_ratios, valid_ratios;
  const auto rows = eval::downsample_sweep(
      split, ratios,
      [&](const eval::Examples& tr, const eval::Examples& va) -> eval::ScoreFn {
        std::size_t pos = 0, neg = 0;
        for (const auto& s : tr.examples) (s.label ? pos : neg)++;
        o.require(pos == 60, "minority changed to " + std::to_string(pos));
        valid_ratios.push_back(eval::natural_ratio(va.examples));
        return [&](const eval::Examples& e) {
          test_sizes.push_back(e.examples.size());
          test_ratios.push_back(eval::natural_ratio(e.examples));
          return std::vector<double>(e.examples.size(), 0.5);
        };
      },
      0.5, 9);
  o.require(rows.size() == 4, "row count");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    o.require(rows[i].minority == 60, "minority count");
    o.require(std::abs(static_cast<double>(rows[i].majority) - ratios[i] * 60) <= 1.0,
              "ratio " + fmt(ratios[i]) + " kept " + std::to_string(rows[i].majority));
    o.require(!rows[i].unchanged, "ratio reported unreachable");
  }
  for (double r : test_ratios) o.require(r == 8.0, "test ratio " + fmt(r));
  for (auto n : test_sizes) o.require(n == split.test.size(), "test size");
  for (double r : valid_ratios) o.require(r == 8.0, "validation ratio " + fmt(r));
}

// -- CLI / service ---------------------------------------------------------

void cli_service(Outcome& o) {
  const auto dir = testing::temp_dir("accept");
  const auto data = dir + "/data";
  io::write_split(data, testing::synthetic_split(30, 90, 5, 15, 10, 30, 3));
  const std::string text =
      "Cells were grown in medium for two days. As shown previously the growth rates differ [4].\n\n"
      "We measured protein levels (see Methods) using standard assays.";
  const auto in = dir + "/draft.txt";
  std::ofstream(in) << text;

  const std::vector<std::vector<std::string>> trainers = {
      {"--model", "enlr", "--min-df", "1", "--alpha", "1", "--lambda", "0.01"},
      {"--model", "rf", "--min-df", "1", "--trees", "20", "--threads", "1"},
      {"--model", "neural", "--hidden", "4", "--word-dim", "8", "--char-dim", "3", "--char-hidden", "3",
       "--mlp-hidden", "6", "--epochs", "2"}};
  for (const auto& extra : trainers) {
    const auto model = dir + "/" + extra[1] + ".cwm";
    std::vector<std::string> args{"train", "--data", data, "--out", model};
    args.insert(args.end(), extra.begin(), extra.end());
    std::ostringstream out, err;
    if (cli::run(args, out, err) != 0) {
      o.require(false, "training " + extra[1] + " failed: " + err.str());
      continue;
    }
    const auto svc = service::make_service(model, service::ServiceConfig{});
    for (bool two_pass : {false, true}) {
      std::vector<std::string> pargs{"--json", "predict", "--model-file", model, "--in", in};
      if (two_pass) pargs.push_back("--two-pass");
      std::ostringstream pout, perr;
      if (cli::run(pargs, pout, perr) != 0) {
        o.require(false, "predict failed: " + perr.str());
        continue;
      }
      const auto a = nlohmann::json::parse(pout.str())["sentences"];
      const auto resp = svc.predict(nlohmann::json{{"raw_text", text}, {"two_pass", two_pass}}.dump());
      o.require(resp.status == 200, "service status " + std::to_string(resp.status));
      const auto b = nlohmann::json::parse(resp.body)["sentences"];
      o.require(a.size() == 3 && a.size() == b.size(), "sentence counts differ");
      for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        const double gap = std::abs(a[i]["probability"].get<double>() - b[i]["probability"].get<double>());
        o.require(gap <= 1e-9, extra[1] + " gap " + fmt(gap));
      }
    }
  }
  std::filesystem::remove_all(dir);
}

}  // namespace

int main() {
  criterion("metric-oracle", 1, metric_oracle);
  criterion("regex-suite", 10, regex_suite);
  criterion("corpus-golden", 1, corpus_golden);
  criterion("gradient-gate", 60, gradient_gate);
  criterion("attention-identities", 10, attention_identities);
  criterion("neural-overfit", 300, neural_overfit);
  criterion("enlr-oracles", 10, enlr_oracles);
  criterion("rf-oracles", 10, rf_oracles);
  criterion("downsampling-harness", 10, downsampling);
  criterion("cli-service-equivalence", 120, cli_service);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
