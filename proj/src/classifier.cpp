#include "citeworth/classifier.hpp"

#include <cstdio>

#include "citeworth/error.hpp"

namespace citeworth::model {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Enlr: return "enlr";
    case Family::Rf: return "rf";
    case Family::Neural: return "neural";
  }
  return "enlr";
}

Family family_from_string(std::string_view s) {
  if (s == "enlr") return Family::Enlr;
  if (s == "rf") return Family::Rf;
  if (s == "neural") return Family::Neural;
  throw Error(ErrorCode::InvalidArgument, "unknown model family '" + std::string(s) + "'");
}

Classifier Classifier::from_enlr(features::FeaturePipeline pipeline, linear::EnlrModel model) {
  if (static_cast<std::size_t>(model.beta.size()) != pipeline.dimension()) {
    throw Error(ErrorCode::FeatureSpaceMismatch, "regression width differs from the feature layout");
  }
  Classifier c;
  c.family_ = Family::Enlr;
  model.feature_names = pipeline.feature_names();
  c.pipeline_ = std::move(pipeline);
  c.enlr_ = std::move(model);
  return c;
}

Classifier Classifier::from_rf(features::FeaturePipeline pipeline, linear::RfModel model) {
  if (model.n_features != pipeline.dimension()) {
    throw Error(ErrorCode::FeatureSpaceMismatch, "forest width differs from the feature layout");
  }
  Classifier c;
  c.family_ = Family::Rf;
  model.feature_names = pipeline.feature_names();
  c.pipeline_ = std::move(pipeline);
  c.rf_ = std::move(model);
  return c;
}

Classifier Classifier::from_neural(neural::NeuralModel model) {
  Classifier c;
  c.family_ = Family::Neural;
  c.neural_ = std::move(model);
  return c;
}

bool Classifier::contextual() const {
  return family_ == Family::Neural ? neural_->config.contextual : pipeline_->config().contextual;
}

std::string Classifier::attention_variant() const {
  return family_ == Family::Neural ? std::string(neural::to_string(neural_->config.attention)) : "none";
}

const features::FeaturePipeline& Classifier::pipeline() const {
  if (!pipeline_) throw Error(ErrorCode::InvalidArgument, "model has no feature pipeline");
  return *pipeline_;
}
const linear::EnlrModel& Classifier::enlr() const {
  if (!enlr_) throw Error(ErrorCode::InvalidArgument, "not an elastic-net model");
  return *enlr_;
}
const linear::RfModel& Classifier::rf() const {
  if (!rf_) throw Error(ErrorCode::InvalidArgument, "not a random-forest model");
  return *rf_;
}
const neural::NeuralModel& Classifier::neural() const {
  if (!neural_) throw Error(ErrorCode::InvalidArgument, "not a neural model");
  return *neural_;
}

double Classifier::predict_proba(const features::ContextBundle& bundle, features::FlagPolicy flags) const {
  switch (family_) {
    case Family::Enlr: return linear::predict_enlr(*enlr_, pipeline_->transform(bundle, flags));
    case Family::Rf: return linear::predict_rf(*rf_, pipeline_->transform(bundle, flags));
    case Family::Neural: {
      neural::ForwardOptions opt;
      opt.flags = flags;
      return neural::forward(bundle, *neural_, opt)[1];
    }
  }
  return 0.0;
}

std::vector<double> Classifier::predict_proba(std::span<const features::ContextBundle> bundles,
                                              features::FlagPolicy flags) const {
  std::vector<double> out;
  out.reserve(bundles.size());
  for (const auto& b : bundles) out.push_back(predict_proba(b, flags));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json neural_config_json(const neural::NeuralConfig& c) {
  return {{"char_embedding_dim", c.char_embedding_dim},
          {"char_hidden", c.char_hidden},
          {"word_dim", c.word_dim},
          {"hidden", c.hidden},
          {"mlp_hidden", c.mlp_hidden},
          {"max_word_chars", c.max_word_chars},
          {"word_min_count", c.word_min_count},
          {"attention", std::string(neural::to_string(c.attention))},
          {"contextual", c.contextual},
          {"dropout", c.dropout},
          {"l2", c.l2},
          {"seed", c.seed}};
}

neural::NeuralConfig neural_config_from(const nlohmann::json& j) {
  neural::NeuralConfig c;
  c.char_embedding_dim = j.at("char_embedding_dim").get<std::size_t>();
  c.char_hidden = j.at("char_hidden").get<std::size_t>();
  c.word_dim = j.at("word_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
  c.max_word_chars = j.at("max_word_chars").get<std::size_t>();
  c.word_min_count = j.at("word_min_count").get<std::size_t>();
  c.attention = neural::attention_from_string(j.at("attention").get<std::string>());
  c.contextual = j.at("contextual").get<bool>();
  c.dropout = j.at("dropout").get<double>();
  c.l2 = j.at("l2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  return {m.data(), m.data() + m.size()};
}

// Named views of every neural tensor with its shape (stored column-major).
std::vector<std::pair<std::string, Eigen::MatrixXd*>> matrices(neural::NeuralParams& p) {
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> out{{"char_embedding", &p.char_embedding},
                                                            {"word_embedding", &p.word_embedding},
                                                            {"mlp.W1", &p.mlp_w1},
                                                            {"mlp.W2", &p.mlp_w2}};
  for (auto [name, l] : {std::pair<const char*, neural::LstmParams*>{"char_fwd", &p.char_fwd},
                         {"char_bwd", &p.char_bwd},
                         {"enc_fwd", &p.enc_fwd},
                         {"enc_bwd", &p.enc_bwd}}) {
    out.emplace_back(std::string(name) + ".Wx", &l->Wx);
    out.emplace_back(std::string(name) + ".Wh", &l->Wh);
  }
  return out;
}

std::vector<std::pair<std::string, Eigen::VectorXd*>> vectors(neural::NeuralParams& p) {
  return {{"char_fwd.b", &p.char_fwd.b}, {"char_bwd.b", &p.char_bwd.b}, {"enc_fwd.b", &p.enc_fwd.b},
          {"enc_bwd.b", &p.enc_bwd.b},   {"mlp.b1", &p.mlp_b1},          {"mlp.b2", &p.mlp_b2}};
}

template <typename T>
std::vector<std::int64_t> as_i64(const std::vector<T>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

nlohmann::json Classifier::header() const {
  nlohmann::json h;
  h["format"] = "citeworth-model";
  h["family"] = std::string(to_string(family_));
  h["contextual"] = contextual();
  h["attention_variant"] = attention_variant();
  h["training"] = training_info;
  nlohmann::json hyper, hashes;
  if (pipeline_) {
    h["pipeline"] = pipeline_->to_json();
    hashes["sentence_vocabulary"] = hex64(pipeline_->sentence_vocabulary().hash());
  }
  if (enlr_) {
    hyper = {{"alpha", enlr_->alpha},
             {"lambda", enlr_->lambda},
             {"intercept", enlr_->intercept},
             {"sweeps", enlr_->sweeps},
             {"converged", enlr_->converged}};
  }
  if (rf_) {
    hyper = {{"trees", rf_->params.trees},
             {"max_features", rf_->params.max_features},
             {"bootstrap", rf_->params.bootstrap},
             {"max_depth", rf_->params.max_depth},
             {"seed", rf_->params.seed},
             {"n_features", rf_->n_features}};
  }
  if (neural_) {
    hyper = neural_config_json(neural_->config);
    h["words"] = neural_->words;
    std::vector<std::uint32_t> chars(neural_->chars.begin(), neural_->chars.end());
    h["chars"] = chars;
    h["feature_scaler"] = neural_->feature_scaler.to_json();
    hashes["words"] = hex64(neural_->word_vocab_hash());
    hashes["chars"] = hex64(neural_->char_vocab_hash());
  }
  h["hyperparameters"] = hyper;
  h["vocabulary_hashes"] = hashes;
  return h;
}

artifact::Artifact Classifier::to_artifact() const {
  artifact::Artifact a;
  a.header = header();
  if (enlr_) {
    a.put("enlr.beta", {enlr_->beta.data(), enlr_->beta.data() + enlr_->beta.size()});
  }
  if (rf_) {
    std::vector<std::int64_t> offsets{0}, feature, left, right;
    std::vector<double> threshold, c0, c1, gain;
    for (const auto& t : rf_->trees) {
      feature.insert(feature.end(), t.feature.begin(), t.feature.end());
      left.insert(left.end(), t.left.begin(), t.left.end());
      right.insert(right.end(), t.right.begin(), t.right.end());
      threshold.insert(threshold.end(), t.threshold.begin(), t.threshold.end());
      c0.insert(c0.end(), t.count0.begin(), t.count0.end());
      c1.insert(c1.end(), t.count1.begin(), t.count1.end());
      gain.insert(gain.end(), t.gain.begin(), t.gain.end());
      offsets.push_back(static_cast<std::int64_t>(feature.size()));
    }
    a.put_int("rf.tree_offsets", std::move(offsets));
    a.put_int("rf.feature", std::move(feature));
    a.put_int("rf.left", std::move(left));
    a.put_int("rf.right", std::move(right));
    a.put("rf.threshold", std::move(threshold));
    a.put("rf.count0", std::move(c0));
    a.put("rf.count1", std::move(c1));
    a.put("rf.gain", std::move(gain));
    a.put("rf.importances", rf_->importances);
  }
  if (neural_) {
    auto& p = const_cast<neural::NeuralParams&>(neural_->params);
    for (auto& [name, m] : matrices(p)) {
      a.put("neural." + name, flatten(*m),
            {static_cast<std::size_t>(m->rows()), static_cast<std::size_t>(m->cols())});
    }
    for (auto& [name, v] : vectors(p)) a.put("neural." + name, {v->data(), v->data() + v->size()});
  }
  return a;
}

Classifier Classifier::from_artifact(const artifact::Artifact& a) {
  const auto& h = a.header;
  Classifier c;
  try {
    if (h.value("format", std::string()) != "citeworth-model") {
      throw Error(ErrorCode::BadArtifact, "header does not describe a citeworth model");
    }
    c.family_ = family_from_string(h.at("family").get<std::string>());
    c.training_info = h.value("training", nlohmann::json::object());
    const auto& hyper = h.at("hyperparameters");
    const auto& hashes = h.at("vocabulary_hashes");

    if (c.family_ != Family::Neural) {
      c.pipeline_ = features::FeaturePipeline::from_json(h.at("pipeline"));
      if (hashes.at("sentence_vocabulary").get<std::string>() !=
          hex64(c.pipeline_->sentence_vocabulary().hash())) {
        throw Error(ErrorCode::BadArtifact, "sentence vocabulary hash mismatch");
      }
    }
    if (c.family_ == Family::Enlr) {
      linear::EnlrModel m;
      const auto& beta = a.f64("enlr.beta").f64;
      if (beta.size() != c.pipeline_->dimension()) {
        throw Error(ErrorCode::BadArtifact, "enlr.beta has the wrong length");
      }
      m.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
      m.alpha = hyper.at("alpha").get<double>();
      m.lambda = hyper.at("lambda").get<double>();
      m.intercept = hyper.at("intercept").get<double>();
      m.sweeps = hyper.at("sweeps").get<std::size_t>();
      m.converged = hyper.at("converged").get<bool>();
      Classifier out = from_enlr(*c.pipeline_, std::move(m));
      out.training_info = c.training_info;
      c = std::move(out);
    } else if (c.family_ == Family::Rf) {
      linear::RfModel m;
      m.params.trees = hyper.at("trees").get<std::size_t>();
      m.params.max_features = hyper.at("max_features").get<std::size_t>();
      m.params.bootstrap = hyper.at("bootstrap").get<bool>();
      m.params.max_depth = hyper.at("max_depth").get<std::size_t>();
      m.params.seed = hyper.at("seed").get<std::uint64_t>();
      m.n_features = hyper.at("n_features").get<std::size_t>();
      const auto& off = a.i64("rf.tree_offsets").i64;
      const auto& feature = a.i64("rf.feature").i64;
      const auto& left = a.i64("rf.left").i64;
      const auto& right = a.i64("rf.right").i64;
      const auto& thr = a.f64("rf.threshold").f64;
      const auto& c0 = a.f64("rf.count0").f64;
      const auto& c1 = a.f64("rf.count1").f64;
      const auto& gain = a.f64("rf.gain").f64;
      const std::size_t total = feature.size();
      if (left.size() != total || right.size() != total || thr.size() != total || c0.size() != total ||
          c1.size() != total || gain.size() != total || off.empty() || off.front() != 0 ||
          static_cast<std::size_t>(off.back()) != total) {
        throw Error(ErrorCode::BadArtifact, "forest tensors have inconsistent lengths");
      }
      for (std::size_t t = 0; t + 1 < off.size(); ++t) {
        const auto b = static_cast<std::size_t>(off[t]), e = static_cast<std::size_t>(off[t + 1]);
        if (b > e || e > total) throw Error(ErrorCode::BadArtifact, "bad tree offsets");
        linear::DecisionTree tree;
        const auto n = static_cast<std::int64_t>(e - b);
        for (std::size_t k = b; k < e; ++k) {
          if (feature[k] >= static_cast<std::int64_t>(m.n_features) ||
              (feature[k] >= 0 && (left[k] < 0 || left[k] >= n || right[k] < 0 || right[k] >= n))) {
            throw Error(ErrorCode::BadArtifact, "tree node out of range");
          }
          tree.feature.push_back(static_cast<std::int32_t>(feature[k]));
          tree.left.push_back(static_cast<std::int32_t>(left[k]));
          tree.right.push_back(static_cast<std::int32_t>(right[k]));
        }
        tree.threshold.assign(thr.begin() + static_cast<std::ptrdiff_t>(b), thr.begin() + static_cast<std::ptrdiff_t>(e));
        tree.count0.assign(c0.begin() + static_cast<std::ptrdiff_t>(b), c0.begin() + static_cast<std::ptrdiff_t>(e));
        tree.count1.assign(c1.begin() + static_cast<std::ptrdiff_t>(b), c1.begin() + static_cast<std::ptrdiff_t>(e));
        tree.gain.assign(gain.begin() + static_cast<std::ptrdiff_t>(b), gain.begin() + static_cast<std::ptrdiff_t>(e));
        m.trees.push_back(std::move(tree));
      }
      m.importances = a.f64("rf.importances").f64;
      if (m.importances.size() != m.n_features) {
        throw Error(ErrorCode::BadArtifact, "importance vector length");
      }
      Classifier out = from_rf(*c.pipeline_, std::move(m));
      out.training_info = c.training_info;
      c = std::move(out);
    } else {
      const auto config = neural_config_from(hyper);
      auto words = h.at("words").get<std::vector<std::string>>();
      std::vector<char32_t> chars;
      for (auto v : h.at("chars").get<std::vector<std::uint32_t>>()) chars.push_back(v);
      neural::NeuralModel m = neural::zero_model(config, std::move(words), std::move(chars));
      m.feature_scaler = features::Scaler::from_json(h.at("feature_scaler"));
      if (hashes.at("words").get<std::string>() != hex64(m.word_vocab_hash()) ||
          hashes.at("chars").get<std::string>() != hex64(m.char_vocab_hash())) {
        throw Error(ErrorCode::BadArtifact, "neural vocabulary hash mismatch");
      }
      for (auto& [name, mat] : matrices(m.params)) {
        const auto& t = a.f64("neural." + name);
        if (t.shape.size() != 2 || t.shape[0] != static_cast<std::size_t>(mat->rows()) ||
            t.shape[1] != static_cast<std::size_t>(mat->cols())) {
          throw Error(ErrorCode::BadArtifact, "tensor '" + name + "' has the wrong shape");
        }
        std::copy(t.f64.begin(), t.f64.end(), mat->data());
      }
      for (auto& [name, vec] : vectors(m.params)) {
        const auto& t = a.f64("neural." + name);
        if (t.f64.size() != static_cast<std::size_t>(vec->size())) {
          throw Error(ErrorCode::BadArtifact, "tensor '" + name + "' has the wrong length");
        }
        std::copy(t.f64.begin(), t.f64.end(), vec->data());
      }
      c.neural_ = std::move(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadArtifact, std::string("model header: ") + e.what());
  }
  return c;
}

void Classifier::save(const std::filesystem::path& path) const { to_artifact().save(path); }

Classifier Classifier::load(const std::filesystem::path& path) {
  return from_artifact(artifact::Artifact::load(path));
}

}  // namespace citeworth::model
