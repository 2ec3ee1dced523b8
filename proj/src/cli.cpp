#include "citeworth/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "citeworth/dataset_io.hpp"
#include "citeworth/error.hpp"
#include "citeworth/linear.hpp"
#include "citeworth/predictor.hpp"
#include "citeworth/service.hpp"

namespace citeworth::cli {

namespace fs = std::filesystem;
using corpus::LabeledSentence;

// ---------------------------------------------------------------------------
// Training and scoring

model::Classifier train_classifier(const TrainOptions& o, const eval::Examples& train,
                                   const eval::Examples& validation, std::ostream* log) {
  const auto bundles = features::make_bundles(train.examples, train.pool);
  if (bundles.empty()) throw Error(ErrorCode::InsufficientData, "no training sentences");

  if (o.family == model::Family::Neural) {
    neural::NeuralConfig nc;
    nc.attention = o.attention;
    nc.contextual = o.contextual;
    nc.word_dim = o.word_dim;
    nc.hidden = o.hidden;
    nc.char_embedding_dim = o.char_dim;
    nc.char_hidden = o.char_hidden;
    nc.mlp_hidden = o.mlp_hidden;
    nc.dropout = o.dropout;
    nc.l2 = o.l2;
    nc.seed = o.seed;
    std::optional<textrep::EmbeddingTable> vectors;
    if (!o.embeddings.empty()) vectors = textrep::load_embeddings(o.embeddings);
    neural::NeuralModel m = neural::init_model(nc, bundles, vectors ? &*vectors : nullptr);

    neural::TrainConfig tc;
    tc.learning_rate = o.learning_rate;
    tc.batch_size = o.batch_size;
    tc.max_epochs = o.epochs;
    tc.patience = o.patience;
    tc.threshold = o.threshold;
    tc.seed = o.seed;
    auto val = features::make_bundles(validation.examples, validation.pool);
    if (val.empty()) val = bundles;
    const auto history = neural::train(m, tc, bundles, val, [&](const neural::EpochRecord& r) {
      if (log) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f val_f1 %.4f\n", r.epoch, r.train_loss,
                      r.validation_f1);
        *log << buf;
      }
    });
    if (history.diverged && log) *log << "warning: " << history.message << '\n';
    auto c = model::Classifier::from_neural(std::move(m));
    c.training_info["history"] = neural::history_csv(history);
    c.training_info["best_epoch"] = history.best_epoch;
    c.training_info["diverged"] = history.diverged;
    return c;
  }

  features::FeatureConfig fc;
  fc.representation = o.representation;
  fc.contextual = o.contextual;
  fc.min_df = o.min_df;
  fc.lda.topics = o.topics;
  fc.lda.iterations = o.lda_iterations;
  fc.lda.burn_in = std::min(fc.lda.burn_in, o.lda_iterations / 2);
  fc.lda.seed = o.seed;
  auto pipeline = features::FeaturePipeline::fit(bundles, fc);
  const auto X = pipeline.transform(bundles);
  const auto y = eval::labels_of(train.examples);

  if (o.family == model::Family::Rf) {
    linear::RfParams p;
    p.trees = o.trees;
    p.max_features = o.max_features;
    p.seed = o.seed;
    p.threads = o.threads;
    auto rf = linear::train_rf(X, y, p);
    return model::Classifier::from_rf(std::move(pipeline), std::move(rf));
  }

  linear::EnlrModel enlr;
  if (o.alpha >= 0 && o.lambda >= 0) {
    linear::EnlrParams p;
    p.alpha = o.alpha;
    p.lambda = o.lambda;
    enlr = linear::fit_enlr(X, y, p);
  } else {
    linear::EnlrCvConfig cv;
    cv.folds = o.folds;
    cv.seed = o.seed;
    cv.threshold = o.threshold;
    if (o.alpha >= 0) cv.alpha_grid = {o.alpha};
    if (o.lambda >= 0) cv.lambda_grid = {o.lambda};
    linear::CvResult result;
    enlr = linear::train_enlr(X, y, cv, &result);
    if (log) {
      *log << "selected alpha " << result.best.alpha << " lambda " << result.best.lambda
           << " (cv f1 " << result.best.mean_f1 << ")\n";
    }
  }
  return model::Classifier::from_enlr(std::move(pipeline), std::move(enlr));
}

std::vector<double> score_examples(const model::Classifier& model, const eval::Examples& examples) {
  const auto bundles = features::make_bundles(examples.examples, examples.pool);
  return model.predict_proba(bundles, features::FlagPolicy::FromLabels);
}

// ---------------------------------------------------------------------------

namespace {

enum class PathKind { Any, File, Directory };

// missing inputs are data errors (exit 2), not usage errors
std::function<void(const std::string&)> must_exist(PathKind kind) {
  return [kind](const std::string& p) {
    const bool ok = kind == PathKind::File        ? fs::is_regular_file(p)
                    : kind == PathKind::Directory ? fs::is_directory(p)
                                                  : fs::exists(p);
    if (!ok) {
      const char* what = kind == PathKind::File ? "file" : kind == PathKind::Directory ? "directory" : "path";
      throw Error(ErrorCode::Io, std::string("no such ") + what + ": " + p);
    }
  };
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

bool is_split_dir(const fs::path& p) {
  if (!fs::is_directory(p)) return false;
  for (const char* ext : {".jsonl", ".tsv"}) {
    if (fs::exists(p / (std::string("train") + ext))) return true;
  }
  return false;
}

std::vector<corpus::ArticleTree> parse_dir(const fs::path& dir, std::ostream& err) {
  std::vector<corpus::ArticleTree> articles;
  for (const auto& f : corpus::list_article_files(dir)) {
    try {
      articles.push_back(corpus::parse_article(corpus::read_maybe_gzip(f), f.stem().string()));
    } catch (const Error& e) {
      err << "skipping " << f.string() << ": " << e.what() << '\n';
    }
  }
  if (articles.empty()) throw Error(ErrorCode::InsufficientData, "no readable articles in " + dir.string());
  return articles;
}

/// A dataset file, or one split of a split directory.
std::vector<LabeledSentence> load_sentences(const fs::path& path, const std::string& which) {
  if (is_split_dir(path)) {
    auto split = io::read_split(path);
    if (which == "train") return split.train;
    if (which == "valid") return split.validation;
    return split.test;
  }
  return io::read_dataset(path);
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  f << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json metrics_json(const eval::MetricTriple& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"degenerate", m.degenerate}};
}

std::vector<double> parse_ratios(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad ratio '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no ratios given");
  return out;
}

struct TrainFlags {
  std::string family = "enlr";
  std::string attention = "cos";
  std::string representation = "bow";
  bool contextual = true;
};

void add_train_options(CLI::App* cmd, TrainOptions& o, TrainFlags& f) {
  cmd->add_option("--model", f.family, "Model family")
      ->check(CLI::IsMember({"enlr", "rf", "neural"}))
      ->capture_default_str();
  cmd->add_option("--attention", f.attention, "Attention score function (neural)")
      ->check(CLI::IsMember({"cos", "dp", "sdp"}))
      ->capture_default_str();
  cmd->add_flag("--contextual,!--no-contextual", f.contextual,
                "Use neighbor sentences and section (default on)");
  cmd->add_option("--representation", f.representation, "Text representation (enlr/rf)")
      ->check(CLI::IsMember({"bow", "tfidf", "topics", "lda"}))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threshold", o.threshold, "Decision threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--min-df", o.min_df, "Minimum document frequency for n-grams")->capture_default_str();
  cmd->add_option("--topics", o.topics, "LDA topics")->capture_default_str();
  cmd->add_option("--lda-iterations", o.lda_iterations, "Gibbs sweeps")->capture_default_str();
  cmd->add_option("--folds", o.folds, "Cross-validation folds (enlr)")->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "Fixed elastic-net mixing (skips its grid)");
  cmd->add_option("--lambda", o.lambda, "Fixed penalty strength (skips its grid)");
  cmd->add_option("--trees", o.trees, "Forest size")->capture_default_str();
  cmd->add_option("--max-features", o.max_features, "Features tried per split (0 = sqrt)");
  cmd->add_option("--threads", o.threads, "Tree-building threads (0 = all cores)");
  cmd->add_option("--word-dim", o.word_dim, "Word embedding size")->capture_default_str();
  cmd->add_option("--hidden", o.hidden, "Encoder hidden size")->capture_default_str();
  cmd->add_option("--char-dim", o.char_dim, "Character embedding size")->capture_default_str();
  cmd->add_option("--char-hidden", o.char_hidden, "Character BiLSTM hidden size")->capture_default_str();
  cmd->add_option("--mlp-hidden", o.mlp_hidden, "Classifier hidden layer")->capture_default_str();
  cmd->add_option("--dropout", o.dropout, "Dropout rate")->capture_default_str();
  cmd->add_option("--l2", o.l2, "L2 strength")->capture_default_str();
  cmd->add_option("--lr", o.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--batch-size", o.batch_size, "Minibatch size")->capture_default_str();
  cmd->add_option("--epochs", o.epochs, "Maximum epochs")->capture_default_str();
  cmd->add_option("--patience", o.patience, "Early-stopping patience")->capture_default_str();
  cmd->add_option("--embeddings", o.embeddings, "Pre-trained word vectors (text format)")
      ->each(must_exist(PathKind::File));
}

void finish_train_options(TrainOptions& o, const TrainFlags& f) {
  o.family = model::family_from_string(f.family);
  o.attention = neural::attention_from_string(f.attention);
  o.representation = features::representation_from_string(f.representation);
  o.contextual = f.contextual;
}

int exit_code_for(const Error& e) {
  return e.code() == ErrorCode::InvalidArgument ? kUsage : kDataError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Citation-worthiness toolkit: corpus building, training, evaluation and serving",
               "citeworth"};
  app.set_config("--config", "", "Configuration file with key=value lines ([command] sections)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  bool json = false;
  app.add_flag("--json", json, "JSON output");

  // build-corpus
  auto* build = app.add_subcommand("build-corpus", "Compile labeled sentence splits from JATS XML");
  std::string xml_dir, build_out, acl_arc, format = "jsonl", scope = "document";
  std::uint64_t build_seed = 0;
  bool data_driven = false;
  build->add_option("xml-dir", xml_dir, "Directory of .xml/.nxml(.gz) articles")->each(must_exist(PathKind::Directory));
  build->add_option("--acl-arc", acl_arc, "Read a one-sentence-per-line labeled file instead")
      ->each(must_exist(PathKind::File));
  build->add_option("--out", build_out, "Output directory")->required();
  build->add_option("--format", format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}));
  build->add_option("--scope", scope, "Neighbor scope")
      ->check(CLI::IsMember({"document", "section", "paragraph"}));
  build->add_option("--seed", build_seed, "Split seed");
  build->add_flag("--data-driven-bounds", data_driven, "Use empirical 5%/95% length quantiles");

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus characteristics");
  std::string stats_path;
  stats->add_option("dataset", stats_path, "Split directory, dataset file or XML directory")
      ->required()
      ->each(must_exist(PathKind::Any));

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  TrainOptions topt;
  TrainFlags tflags;
  std::string train_data, train_out, history_out;
  double train_ratio = 0;
  train->add_option("--data", train_data, "Split directory")->required()->each(must_exist(PathKind::Directory));
  train->add_option("--out", train_out, "Model file")->required();
  train->add_option("--downsample", train_ratio, "Down-sample the training split to this ratio");
  train->add_option("--history", history_out, "Write the neural epoch history CSV here");
  add_train_options(train, topt, tflags);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Precision, recall and F1 on a labeled set");
  std::string eval_model, eval_test;
  double eval_threshold = 0.5;
  evaluate->add_option("--model-file", eval_model, "Model file")->required()->each(must_exist(PathKind::File));
  evaluate->add_option("--test", eval_test, "Split directory (test part) or dataset file")
      ->required()
      ->each(must_exist(PathKind::Any));
  evaluate->add_option("--threshold", eval_threshold, "Decision threshold")->check(CLI::Range(0.0, 1.0));

  // downsample-sweep
  auto* sweep = app.add_subcommand("downsample-sweep", "Train at several non-citing:citing ratios");
  TrainOptions sopt;
  TrainFlags sflags;
  std::string sweep_data, sweep_out, ratios = "1,2,3,4.13";
  sweep->add_option("--data", sweep_data, "Split directory")->required()->each(must_exist(PathKind::Directory));
  sweep->add_option("--ratios", ratios, "Comma-separated ratios")->capture_default_str();
  sweep->add_option("--out", sweep_out, "CSV output (default stdout)");
  add_train_options(sweep, sopt, sflags);

  // cross-corpus
  auto* cross = app.add_subcommand("cross-corpus", "Train on each corpus, test on every corpus");
  TrainOptions copt;
  TrainFlags cflags;
  std::vector<std::string> corpora;
  std::string cross_out;
  cross->add_option("--corpus", corpora, "name=split-dir (repeat)")->required();
  cross->add_option("--out", cross_out, "Output file (default stdout)");
  add_train_options(cross, copt, cflags);

  // predict
  auto* predict = app.add_subcommand("predict", "Score the sentences of a text");
  std::string pred_model, pred_in, pred_text, pred_section;
  predict::PredictOptions popt;
  bool pred_no_context = false;
  predict->add_option("--model-file", pred_model, "Model file")->required()->each(must_exist(PathKind::File));
  auto* in_opt = predict->add_option("--in", pred_in, "Text file (- for stdin)");
  auto* text_opt = predict->add_option("--text", pred_text, "Text given inline");
  in_opt->excludes(text_opt);
  predict->add_option("--threshold", popt.threshold, "Decision threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  predict->add_option("--section", pred_section, "Section type for every sentence");
  predict->add_flag("--two-pass", popt.two_pass, "Feed first-pass decisions back as neighbor flags");
  predict->add_flag("--no-contextual", pred_no_context, "Score sentences without neighbors");

  // report
  auto* report = app.add_subcommand("report", "Highest-probability sentences of a labeled set");
  std::string rep_model, rep_data, rep_out;
  std::size_t top_k = 100;
  double rep_threshold = 0.5;
  report->add_option("--model-file", rep_model, "Model file")->required()->each(must_exist(PathKind::File));
  report->add_option("--data", rep_data, "Split directory (test part) or dataset file")
      ->required()
      ->each(must_exist(PathKind::Any));
  report->add_option("--top-k", top_k, "Rows to keep")->capture_default_str();
  report->add_option("--threshold", rep_threshold, "Minimum probability")->check(CLI::Range(0.0, 1.0));
  report->add_option("--out", rep_out, "Output file (default stdout)");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP prediction service");
  service::ServiceConfig scfg;
  std::string serve_model;
  serve->add_option("--model-file", serve_model, "Model file")->required();
  serve->add_option("--port", scfg.port, "Port")->capture_default_str();
  serve->add_option("--host", scfg.host, "Bind address")->capture_default_str();
  serve->add_option("--cors-origin", scfg.cors_origin, "Allowed CORS origin")->capture_default_str();

  // importance
  auto* importance = app.add_subcommand("importance", "Forest importances with regression signs");
  TrainOptions iopt;
  TrainFlags iflags;
  std::string imp_data, imp_dir;
  std::size_t imp_top = 10;
  importance->add_option("--data", imp_data, "Split directory")->required()->each(must_exist(PathKind::Directory));
  importance->add_option("--out-dir", imp_dir, "Write importance.csv and categories.csv here");
  importance->add_option("--top", imp_top, "Top features per text block to print")->capture_default_str();
  add_train_options(importance, iopt, iflags);

  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    sub->allow_config_extras(CLI::config_extras_mode::error);
  }

  // --config belongs to the root command but is accepted anywhere
  std::vector<std::string> ordered;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      ordered.push_back(args[i]);
      ordered.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      ordered.push_back(args[i]);
    } else {
      rest.push_back(args[i]);
    }
  }
  ordered.insert(ordered.end(), rest.begin(), rest.end());
  std::vector<std::string> reversed(ordered.rbegin(), ordered.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::Normal);
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }

  try {
    if (*build) {
      corpus::CorpusSplit split;
      corpus::BuildConfig bc;
      bc.seed = build_seed;
      bc.filter.data_driven = data_driven;
      bc.neighbor_scope = scope == "paragraph" ? corpus::NeighborScope::Paragraph
                          : scope == "section" ? corpus::NeighborScope::Section
                                               : corpus::NeighborScope::Document;
      std::vector<corpus::ArticleTree> articles;
      if (!acl_arc.empty()) {
        articles = io::read_acl_arc(fs::path(acl_arc));
      } else if (!xml_dir.empty()) {
        articles = parse_dir(xml_dir, err);
      } else {
        err << "error: build-corpus needs an XML directory or --acl-arc\n\n" << build->help();
        return kUsage;
      }
      split = corpus::build_dataset(articles, bc);
      fs::create_directories(build_out);
      io::write_split(build_out, split, format == "tsv" ? io::DatasetFormat::Tsv : io::DatasetFormat::JsonLines);
      const auto t = corpus::corpus_stats(split);
      out << (json ? io::stats_to_json(t).dump(2) + "\n" : io::format_stats(t));
      return kOk;
    }

    if (*stats) {
      std::vector<LabeledSentence> sentences;
      if (is_split_dir(stats_path)) {
        const auto split = io::read_split(stats_path);
        sentences = split.train;
        sentences.insert(sentences.end(), split.validation.begin(), split.validation.end());
        sentences.insert(sentences.end(), split.test.begin(), split.test.end());
      } else if (fs::is_directory(stats_path)) {
        for (const auto& a : parse_dir(stats_path, err)) {
          auto s = corpus::label_article(a, corpus::LengthBounds{}, corpus::NeighborScope::Document);
          sentences.insert(sentences.end(), s.begin(), s.end());
        }
      } else {
        sentences = io::read_dataset(stats_path);
      }
      const auto t = corpus::corpus_stats(sentences);
      out << (json ? io::stats_to_json(t).dump(2) + "\n" : io::format_stats(t));
      return kOk;
    }

    if (*train) {
      finish_train_options(topt, tflags);
      const auto split = io::read_split(train_data);
      std::vector<LabeledSentence> examples = split.train;
      if (train_ratio > 0) {
        auto ds = eval::downsample(split.train, train_ratio, topt.seed);
        if (ds.unchanged) err << "warning: " << ds.warning << '\n';
        examples = std::move(ds.train);
      }
      auto model = train_classifier(topt, {examples, split.train}, {split.validation, split.validation}, &err);
      model.training_info["data"] = train_data;
      model.training_info["train_sentences"] = examples.size();
      model.training_info["seed"] = topt.seed;
      model.save(train_out);
      if (!history_out.empty() && model.family() == model::Family::Neural) {
        write_text(history_out, model.training_info["history"].get<std::string>(), out);
      }
      const auto probs = score_examples(model, {split.validation, split.validation});
      const auto m = split.validation.empty()
                         ? eval::MetricTriple{}
                         : eval::prf1(eval::decide(probs, topt.threshold), eval::labels_of(split.validation));
      if (json) {
        out << nlohmann::json{{"model_file", train_out}, {"validation", metrics_json(m)}}.dump(2) << '\n';
      } else {
        out << "wrote " << train_out << "\nvalidation precision " << fmt6(m.precision) << " recall "
            << fmt6(m.recall) << " f1 " << fmt6(m.f1) << '\n';
      }
      return kOk;
    }

    if (*evaluate) {
      const auto model = model::Classifier::load(eval_model);
      const auto test = load_sentences(eval_test, "test");
      const auto probs = score_examples(model, {test, test});
      const auto counts = eval::confusion(eval::decide(probs, eval_threshold), eval::labels_of(test));
      const auto m = eval::prf1(counts);
      if (json) {
        auto j = metrics_json(m);
        j["tp"] = counts.tp;
        j["fp"] = counts.fp;
        j["fn"] = counts.fn;
        j["tn"] = counts.tn;
        j["threshold"] = eval_threshold;
        out << j.dump(2) << '\n';
      } else {
        out << "precision " << fmt6(m.precision) << "\nrecall " << fmt6(m.recall) << "\nf1 "
            << fmt6(m.f1) << '\n';
        if (m.degenerate) out << "note: a metric had a zero denominator and was set to 0\n";
      }
      return kOk;
    }

    if (*sweep) {
      finish_train_options(sopt, sflags);
      const auto split = io::read_split(sweep_data);
      const auto rs = parse_ratios(ratios);
      const auto rows = eval::downsample_sweep(
          split, rs,
          [&](const eval::Examples& tr, const eval::Examples& va) -> eval::ScoreFn {
            auto m = std::make_shared<model::Classifier>(train_classifier(sopt, tr, va, &err));
            return [m](const eval::Examples& ex) { return score_examples(*m, ex); };
          },
          sopt.threshold, sopt.seed);
      for (const auto& r : rows) {
        if (r.unchanged) err << "warning: ratio " << r.ratio << " unreachable, training set unchanged\n";
      }
      if (json) {
        auto arr = nlohmann::json::array();
        for (const auto& r : rows) {
          arr.push_back({{"ratio", r.ratio},
                         {"minority", r.minority},
                         {"majority", r.majority},
                         {"unchanged", r.unchanged},
                         {"metrics", metrics_json(r.metrics)}});
        }
        write_text(sweep_out, arr.dump(2) + "\n", out);
      } else {
        write_text(sweep_out, eval::sweep_csv(rows), out);
      }
      return kOk;
    }

    if (*cross) {
      finish_train_options(copt, cflags);
      std::vector<eval::NamedCorpus> named;
      for (const auto& spec : corpora) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
          err << "error: --corpus expects name=directory, got '" << spec << "'\n\n" << cross->help();
          return kUsage;
        }
        const fs::path dir = spec.substr(eq + 1);
        if (!is_split_dir(dir)) throw Error(ErrorCode::Io, "not a split directory: " + dir.string());
        named.push_back({spec.substr(0, eq), io::read_split(dir)});
      }
      const auto table = eval::cross_corpus(
          named,
          [&](const eval::Examples& tr, const eval::Examples& va) -> eval::ScoreFn {
            auto m = std::make_shared<model::Classifier>(train_classifier(copt, tr, va, &err));
            return [m](const eval::Examples& ex) { return score_examples(*m, ex); };
          },
          copt.threshold, copt.seed);
      write_text(cross_out, json ? eval::cross_corpus_json(table).dump(2) + "\n" : eval::cross_corpus_csv(table),
                 out);
      return kOk;
    }

    if (*predict) {
      const auto model = model::Classifier::load(pred_model);
      std::string text;
      if (!pred_text.empty()) {
        text = pred_text;
      } else if (pred_in.empty() || pred_in == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        text = ss.str();
      } else {
        if (!fs::exists(pred_in)) throw Error(ErrorCode::Io, "no such file " + pred_in);
        text = read_text(pred_in);
      }
      popt.contextual = !pred_no_context;
      popt.default_section = pred_section;
      const auto preds = predict::predict_sentences(model, predict::split_raw_text(text), popt);
      if (json) {
        auto arr = nlohmann::json::array();
        for (const auto& p : preds) {
          arr.push_back({{"text", p.text},
                         {"probability", p.probability},
                         {"worthy", p.worthy},
                         {"section_type", p.section_type}});
        }
        out << nlohmann::json{{"sentences", arr}}.dump(2) << '\n';
      } else {
        out << "probability\tworthy\ttext\n";
        for (const auto& p : preds) {
          out << fmt17(p.probability) << '\t' << (p.worthy ? "yes" : "no") << '\t' << p.text << '\n';
        }
      }
      return kOk;
    }

    if (*report) {
      const auto model = model::Classifier::load(rep_model);
      const auto data = load_sentences(rep_data, "test");
      const auto probs = score_examples(model, {data, data});
      const auto rows = eval::ranked_report(data, probs, rep_threshold, top_k);
      write_text(rep_out, json ? eval::ranked_json(rows).dump(2) + "\n" : eval::ranked_csv(rows), out);
      return kOk;
    }

    if (*serve) {
      const auto svc = service::make_service(serve_model, scfg);
      service::serve(svc);
      return kOk;
    }

    if (*importance) {
      finish_train_options(iopt, iflags);
      const auto split = io::read_split(imp_data);
      iopt.family = model::Family::Rf;
      const auto rf = train_classifier(iopt, {split.train, split.train}, {split.validation, split.validation}, &err);
      // same layout for the sign model
      const auto bundles = features::make_bundles(split.train, split.train);
      const auto X = rf.pipeline().transform(bundles);
      linear::EnlrModel enlr;
      const auto y = eval::labels_of(split.train);
      if (iopt.alpha >= 0 && iopt.lambda >= 0) {
        enlr = linear::fit_enlr(X, y, {iopt.alpha, iopt.lambda});
      } else {
        linear::EnlrCvConfig cv;
        cv.folds = iopt.folds;
        cv.seed = iopt.seed;
        enlr = linear::train_enlr(X, y, cv);
      }
      const auto rep = linear::importance_report(rf.rf(), enlr, rf.pipeline().feature_names(),
                                                 rf.pipeline().feature_categories());
      if (!imp_dir.empty()) {
        fs::create_directories(imp_dir);
        write_text((fs::path(imp_dir) / "importance.csv").string(), linear::importance_csv(rep), out);
        write_text((fs::path(imp_dir) / "categories.csv").string(), linear::category_csv(rep), out);
      }
      if (json) {
        out << linear::importance_json(rep).dump(2) << '\n';
      } else {
        out << linear::category_csv(rep);
        for (const char* block : {"section", "prev", "cur", "next"}) {
          const auto top = linear::top_features(rep, block, imp_top);
          if (top.empty()) continue;
          out << "\ntop " << block << " features\n";
          for (const auto& f : top) {
            out << "  " << f.feature << ' ' << fmt6(f.importance) << ' '
                << (f.sign > 0 ? '+' : f.sign < 0 ? '-' : '0') << '\n';
          }
        }
      }
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  err << app.help();
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace citeworth::cli
