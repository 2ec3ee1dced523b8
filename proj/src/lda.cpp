#include <algorithm>
#include <numeric>

#include "citeworth/error.hpp"
#include "citeworth/rng.hpp"
#include "citeworth/textrep.hpp"

namespace citeworth::textrep {

namespace {

std::size_t sample_discrete(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

void normalize(std::vector<double>& v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (s > 0) {
    for (double& x : v) x /= s;
  }
}

}  // namespace

std::optional<std::uint32_t> TopicModel::index_of(std::string_view word) const {
  auto it = word_index.find(std::string(word));
  if (it == word_index.end()) return std::nullopt;
  return it->second;
}

nlohmann::json TopicModel::to_json() const {
  return {{"magic", "citeworth-topic-model"},
          {"format_version", 1},
          {"topics", topics},
          {"alpha", alpha},
          {"beta", beta},
          {"iterations", iterations},
          {"burn_in", burn_in},
          {"infer_iterations", infer_iterations},
          {"infer_burn_in", infer_burn_in},
          {"seed", seed},
          {"vocabulary", vocabulary},
          {"phi", phi}};
}

TopicModel TopicModel::from_json(const nlohmann::json& j) {
  if (j.value("magic", "") != "citeworth-topic-model" || j.value("format_version", 0) != 1) {
    throw Error(ErrorCode::BadArtifact, "not a version-1 topic model record");
  }
  TopicModel m;
  m.topics = j.at("topics").get<std::size_t>();
  m.alpha = j.at("alpha").get<double>();
  m.beta = j.at("beta").get<double>();
  m.iterations = j.at("iterations").get<std::size_t>();
  m.burn_in = j.at("burn_in").get<std::size_t>();
  m.infer_iterations = j.at("infer_iterations").get<std::size_t>();
  m.infer_burn_in = j.at("infer_burn_in").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  m.phi = j.at("phi").get<std::vector<std::vector<double>>>();
  for (std::size_t i = 0; i < m.vocabulary.size(); ++i) {
    m.word_index.emplace(m.vocabulary[i], static_cast<std::uint32_t>(i));
  }
  if (m.phi.size() != m.topics) throw Error(ErrorCode::BadArtifact, "phi row count");
  return m;
}

TopicModel fit_lda(const std::vector<std::vector<std::string>>& corpus, const LdaConfig& config,
                   const std::function<void(const GibbsDiagnostics&)>& observer) {
  if (config.topics < 2) throw Error(ErrorCode::InvalidArgument, "LDA needs at least 2 topics");
  if (corpus.empty()) throw Error(ErrorCode::InvalidArgument, "LDA corpus is empty");

  TopicModel model;
  model.topics = config.topics;
  model.alpha = config.alpha > 0 ? config.alpha : 50.0 / static_cast<double>(config.topics);
  model.beta = config.beta;
  model.iterations = config.iterations;
  model.burn_in = config.burn_in;
  model.infer_iterations = config.infer_iterations;
  model.infer_burn_in = config.infer_burn_in;
  model.seed = config.seed;

  const Vocabulary vocab = fit_vocab(corpus, 1, config.min_df);
  model.vocabulary = vocab.terms();
  for (std::size_t i = 0; i < model.vocabulary.size(); ++i) {
    model.word_index.emplace(model.vocabulary[i], static_cast<std::uint32_t>(i));
  }

  const std::size_t K = model.topics;
  const std::size_t V = model.vocabulary.size();
  const double alpha = model.alpha;
  const double beta = model.beta;
  const double vbeta = static_cast<double>(V) * beta;

  std::vector<std::vector<std::uint32_t>> docs;
  docs.reserve(corpus.size());
  std::size_t total_tokens = 0;
  for (const auto& doc : corpus) {
    std::vector<std::uint32_t> ids;
    for (const auto& t : doc) {
      if (auto idx = model.index_of(t)) ids.push_back(*idx);
    }
    total_tokens += ids.size();
    docs.push_back(std::move(ids));
  }

  Rng rng(config.seed);
  std::vector<std::vector<std::uint32_t>> z(docs.size());
  std::vector<std::vector<std::size_t>> n_dk(docs.size(), std::vector<std::size_t>(K, 0));
  std::vector<std::size_t> n_kw(K * V, 0);
  std::vector<std::size_t> n_k(K, 0);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    z[d].resize(docs[d].size());
    for (std::size_t i = 0; i < docs[d].size(); ++i) {
      const auto k = static_cast<std::uint32_t>(rng.uniform_index(K));
      z[d][i] = k;
      ++n_dk[d][k];
      ++n_kw[k * V + docs[d][i]];
      ++n_k[k];
    }
  }

  std::vector<double> phi_sum(K * V, 0.0);
  std::size_t samples = 0;
  auto accumulate_phi = [&] {
    for (std::size_t k = 0; k < K; ++k) {
      const double denom = static_cast<double>(n_k[k]) + vbeta;
      for (std::size_t w = 0; w < V; ++w) {
        phi_sum[k * V + w] += (static_cast<double>(n_kw[k * V + w]) + beta) / denom;
      }
    }
    ++samples;
  };

  std::vector<double> cumulative(K);
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      for (std::size_t i = 0; i < docs[d].size(); ++i) {
        const std::uint32_t w = docs[d][i];
        const std::uint32_t old = z[d][i];
        --n_dk[d][old];
        --n_kw[old * V + w];
        --n_k[old];
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          acc += (static_cast<double>(n_dk[d][k]) + alpha) *
                 (static_cast<double>(n_kw[k * V + w]) + beta) /
                 (static_cast<double>(n_k[k]) + vbeta);
          cumulative[k] = acc;
        }
        const auto k = static_cast<std::uint32_t>(sample_discrete(cumulative, rng));
        z[d][i] = k;
        ++n_dk[d][k];
        ++n_kw[k * V + w];
        ++n_k[k];
      }
    }
    if (observer) {
      observer({it, total_tokens, std::accumulate(n_k.begin(), n_k.end(), std::size_t{0})});
    }
    if (it > config.burn_in && config.sample_lag > 0 && (it - config.burn_in) % config.sample_lag == 0) {
      accumulate_phi();
    }
  }
  if (samples == 0) accumulate_phi();

  model.phi.assign(K, std::vector<double>(V, 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t w = 0; w < V; ++w) {
      model.phi[k][w] = phi_sum[k * V + w] / static_cast<double>(samples);
    }
    normalize(model.phi[k]);
  }
  return model;
}

std::vector<double> infer_topics(const std::vector<std::string>& tokens, const TopicModel& model) {
  const std::size_t K = model.topics;
  std::vector<double> theta(K, 1.0 / static_cast<double>(K));
  std::vector<std::uint32_t> words;
  for (const auto& t : tokens) {
    if (auto idx = model.index_of(t)) words.push_back(*idx);
  }
  if (words.empty() || K == 0) return theta;

  Rng rng(derive_seed(model.seed, 0x1F0));
  std::vector<std::uint32_t> z(words.size());
  std::vector<std::size_t> n_k(K, 0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    z[i] = static_cast<std::uint32_t>(rng.uniform_index(K));
    ++n_k[z[i]];
  }

  const double alpha = model.alpha;
  const double denom = static_cast<double>(words.size()) + static_cast<double>(K) * alpha;
  std::vector<double> sum(K, 0.0);
  std::size_t samples = 0;
  std::vector<double> cumulative(K);
  for (std::size_t it = 1; it <= model.infer_iterations; ++it) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      --n_k[z[i]];
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        acc += (static_cast<double>(n_k[k]) + alpha) * model.phi[k][words[i]];
        cumulative[k] = acc;
      }
      z[i] = static_cast<std::uint32_t>(sample_discrete(cumulative, rng));
      ++n_k[z[i]];
    }
    if (it > model.infer_burn_in) {
      for (std::size_t k = 0; k < K; ++k) sum[k] += (static_cast<double>(n_k[k]) + alpha) / denom;
      ++samples;
    }
  }
  if (samples == 0) {
    for (std::size_t k = 0; k < K; ++k) sum[k] = (static_cast<double>(n_k[k]) + alpha) / denom;
  }
  normalize(sum);
  return sum;
}

}  // namespace citeworth::textrep
