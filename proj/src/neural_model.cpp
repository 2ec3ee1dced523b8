#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "citeworth/error.hpp"
#include "citeworth/neural.hpp"
#include "citeworth/text_util.hpp"

namespace citeworth::neural {

// ---------------------------------------------------------------------------
// Attention

std::string_view to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::Cos: return "cos";
    case AttentionVariant::Dp: return "dp";
    case AttentionVariant::Sdp: return "sdp";
  }
  return "cos";
}

AttentionVariant attention_from_string(std::string_view s) {
  if (s == "cos") return AttentionVariant::Cos;
  if (s == "dp") return AttentionVariant::Dp;
  if (s == "sdp") return AttentionVariant::Sdp;
  throw Error(ErrorCode::InvalidArgument, "unknown attention variant '" + std::string(s) + "'");
}

namespace {

constexpr double kTinyNorm = 1e-12;

}  // namespace

double attention_score(const VectorXd& q, const VectorXd& k, AttentionVariant v, double d_k) {
  if (q.size() != k.size()) throw Error(ErrorCode::DimensionMismatch, "query/key size differ");
  switch (v) {
    case AttentionVariant::Dp:
      return q.dot(k);
    case AttentionVariant::Sdp:
      return q.dot(k) / std::sqrt(d_k);
    case AttentionVariant::Cos: {
      const double nq = q.norm(), nk = k.norm();
      if (nq < kTinyNorm || nk < kTinyNorm) return 0.0;
      return std::clamp(q.dot(k) / (nq * nk), -1.0, 1.0);
    }
  }
  return 0.0;
}

AttentionOutput attention_pool(const MatrixXd& H, const VectorXd& q, AttentionVariant v,
                               std::span<const bool> mask, double d_k) {
  const Eigen::Index n = H.rows();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "attention over an empty sequence");
  if (q.size() != H.cols()) throw Error(ErrorCode::DimensionMismatch, "query size differs from keys");
  if (!mask.empty() && mask.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::DimensionMismatch, "mask length differs from sequence length");
  }
  if (d_k <= 0) d_k = static_cast<double>(q.size());
  auto live = [&](Eigen::Index i) { return mask.empty() || mask[static_cast<std::size_t>(i)]; };

  AttentionOutput out;
  out.scores.resize(n);
  out.alpha = VectorXd::Zero(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    out.scores[i] = live(i) ? attention_score(q, H.row(i).transpose(), v, d_k)
                            : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, out.scores[i]);
  }
  out.z = VectorXd::Zero(H.cols());
  if (!std::isfinite(mx)) return out;  // everything masked
  double sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!live(i)) continue;
    out.alpha[i] = std::exp(out.scores[i] - mx);
    sum += out.alpha[i];
  }
  out.alpha /= sum;
  out.z = H.transpose() * out.alpha;
  return out;
}

void attention_backward(const MatrixXd& H, const VectorXd& q, AttentionVariant v, double d_k,
                        const AttentionOutput& out, const VectorXd& dz, MatrixXd& dH,
                        VectorXd& dq) {
  const Eigen::Index n = H.rows();
  if (d_k <= 0) d_k = static_cast<double>(q.size());
  const VectorXd dalpha = H * dz;
  const double mean = out.alpha.dot(dalpha);
  const double nq = q.norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = out.alpha[i];
    if (a == 0.0) continue;
    dH.row(i) += a * dz.transpose();
    const double ds = a * (dalpha[i] - mean);
    switch (v) {
      case AttentionVariant::Dp:
        dq += ds * H.row(i).transpose();
        dH.row(i) += ds * q.transpose();
        break;
      case AttentionVariant::Sdp: {
        const double s = ds / std::sqrt(d_k);
        dq += s * H.row(i).transpose();
        dH.row(i) += s * q.transpose();
        break;
      }
      case AttentionVariant::Cos: {
        const double nk = H.row(i).norm();
        if (nq < kTinyNorm || nk < kTinyNorm) break;
        const double sc = out.scores[i];
        dq += ds * (H.row(i).transpose() / (nq * nk) - sc * q / (nq * nq));
        dH.row(i) += ds * (q.transpose() / (nq * nk) - sc * H.row(i) / (nk * nk));
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<NeuralParams::Tensor> NeuralParams::tensors() {
  std::vector<Tensor> t;
  auto add = [&](std::string name, auto& m) {
    t.push_back({std::move(name), m.data(), static_cast<std::size_t>(m.size())});
  };
  auto add_lstm = [&](const std::string& prefix, LstmParams& p) {
    add(prefix + ".Wx", p.Wx);
    add(prefix + ".Wh", p.Wh);
    add(prefix + ".b", p.b);
  };
  add("char_embedding", char_embedding);
  add_lstm("char_fwd", char_fwd);
  add_lstm("char_bwd", char_bwd);
  add("word_embedding", word_embedding);
  add_lstm("enc_fwd", enc_fwd);
  add_lstm("enc_bwd", enc_bwd);
  add("mlp.W1", mlp_w1);
  add("mlp.b1", mlp_b1);
  add("mlp.W2", mlp_w2);
  add("mlp.b2", mlp_b2);
  return t;
}

std::vector<std::pair<std::string, const double*>> NeuralParams::const_tensors() const {
  std::vector<std::pair<std::string, const double*>> out;
  for (auto& t : const_cast<NeuralParams*>(this)->tensors()) out.emplace_back(t.name, t.data);
  return out;
}

NeuralParams NeuralParams::zeros_like() const {
  NeuralParams z = *this;
  z.set_zero();
  return z;
}

void NeuralParams::set_zero() {
  for (auto& t : tensors()) std::fill(t.data, t.data + t.size, 0.0);
}

double NeuralParams::squared_norm() const {
  double s = 0;
  for (auto& t : const_cast<NeuralParams*>(this)->tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) s += t.data[i] * t.data[i];
  }
  return s;
}

std::size_t NeuralParams::count() const {
  std::size_t n = 0;
  for (auto& t : const_cast<NeuralParams*>(this)->tensors()) n += t.size;
  return n;
}

// ---------------------------------------------------------------------------
// Vocabularies

std::vector<char32_t> utf8_code_points(std::string_view s) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = 0xFFFD;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c >> 4) == 0xE) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c >> 3) == 0x1E) {
      len = 4;
      cp = c & 0x07;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::size_t NeuralModel::fusion_dim() const {
  const std::size_t z = 2 * config.hidden;
  return config.contextual ? 4 * z + features::HandcraftedFeatures::kCount : z;
}

std::optional<std::size_t> NeuralModel::word_id(const std::string& w) const {
  auto it = word_index.find(w);
  if (it == word_index.end()) return std::nullopt;
  return it->second;
}

std::size_t NeuralModel::char_id(char32_t c) const {
  auto it = char_index.find(c);
  return it == char_index.end() ? 0 : it->second;
}

std::uint64_t NeuralModel::word_vocab_hash() const {
  std::uint64_t h = fnv1a("words");
  for (const auto& w : words) {
    h = fnv1a(w, h);
    h = fnv1a(std::string_view("\0", 1), h);
  }
  return h;
}

std::uint64_t NeuralModel::char_vocab_hash() const {
  std::uint64_t h = fnv1a("chars");
  for (char32_t c : chars) {
    const std::uint32_t v = c;
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h);
  }
  return h;
}

void NeuralModel::rebuild_indexes() {
  word_index.clear();
  for (std::size_t i = 0; i < words.size(); ++i) word_index.emplace(words[i], i);
  char_index.clear();
  for (std::size_t i = 0; i < chars.size(); ++i) char_index.emplace(chars[i], i + 1);
}

namespace {

std::vector<std::string> bundle_texts(const ContextBundle& b) {
  std::vector<std::string> out{b.section_type, b.cur_sentence.text};
  if (b.prev_sentence) out.push_back(b.prev_sentence->text);
  if (b.next_sentence) out.push_back(b.next_sentence->text);
  return out;
}

void shape_params(NeuralParams& p, const NeuralConfig& c, std::size_t n_words, std::size_t n_chars,
                  std::size_t fusion) {
  const auto I = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  p.char_embedding = MatrixXd::Zero(I(n_chars + 1), I(c.char_embedding_dim));
  p.char_fwd = LstmParams::zeros(c.char_embedding_dim, c.char_hidden);
  p.char_bwd = LstmParams::zeros(c.char_embedding_dim, c.char_hidden);
  p.word_embedding = MatrixXd::Zero(I(n_words), I(c.word_dim));
  const std::size_t enc_in = c.word_dim + 2 * c.char_hidden;
  p.enc_fwd = LstmParams::zeros(enc_in, c.hidden);
  p.enc_bwd = LstmParams::zeros(enc_in, c.hidden);
  p.mlp_w1 = MatrixXd::Zero(I(c.mlp_hidden), I(fusion));
  p.mlp_b1 = VectorXd::Zero(I(c.mlp_hidden));
  p.mlp_w2 = MatrixXd::Zero(2, I(c.mlp_hidden));
  p.mlp_b2 = VectorXd::Zero(2);
}

void fill_uniform(double* data, std::size_t n, double a, Rng& rng) {
  for (std::size_t i = 0; i < n; ++i) data[i] = rng.uniform(-a, a);
}

void xavier(MatrixXd& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  fill_uniform(m.data(), static_cast<std::size_t>(m.size()), a, rng);
}

void init_lstm(LstmParams& p, Rng& rng) {
  const std::size_t h = p.hidden();
  xavier(p.Wx, p.input(), 4 * h, rng);
  xavier(p.Wh, h, 4 * h, rng);
  p.b.setZero();
  p.b.segment(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(h)).setOnes();  // forget gate
}

}  // namespace

NeuralModel zero_model(const NeuralConfig& config, std::vector<std::string> words,
                       std::vector<char32_t> chars) {
  NeuralModel m;
  m.config = config;
  m.words = std::move(words);
  m.chars = std::move(chars);
  m.rebuild_indexes();
  shape_params(m.params, config, m.words.size(), m.chars.size(), m.fusion_dim());
  std::vector<features::ScaleMode> modes(features::HandcraftedFeatures::kCount,
                                         features::ScaleMode::ZScore);
  m.feature_scaler = features::fit_scaler(std::vector<std::vector<double>>{}, modes);
  return m;
}

NeuralModel init_model(const NeuralConfig& config, std::span<const ContextBundle> train,
                       const textrep::EmbeddingTable* pretrained) {
  if (train.empty()) throw Error(ErrorCode::InsufficientData, "no training bundles");
  if (config.hidden == 0 || config.char_hidden == 0 || config.word_dim == 0 ||
      config.char_embedding_dim == 0 || config.mlp_hidden == 0) {
    throw Error(ErrorCode::InvalidArgument, "network dimensions must be positive");
  }
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "dropout must lie in [0, 1)");
  }
  std::map<std::string, std::size_t> counts;
  std::set<char32_t> charset;
  for (const auto& b : train) {
    for (const auto& text : bundle_texts(b)) {
      for (const auto& tok : textrep::tokenize(text)) {
        ++counts[tok];
        auto cps = utf8_code_points(tok);
        if (cps.size() > config.max_word_chars) cps.resize(config.max_word_chars);
        charset.insert(cps.begin(), cps.end());
      }
    }
  }
  std::vector<std::string> words;
  for (const auto& [w, c] : counts) {
    if (c >= config.word_min_count) words.push_back(w);
  }
  NeuralModel m = zero_model(config, std::move(words), {charset.begin(), charset.end()});

  std::vector<std::vector<double>> rows;
  rows.reserve(train.size());
  for (const auto& b : train) {
    const auto v = features::handcrafted_features(b).values();
    rows.emplace_back(v.begin(), v.end());
  }
  m.feature_scaler = features::fit_scaler(
      rows, std::vector<features::ScaleMode>(features::HandcraftedFeatures::kCount,
                                             features::ScaleMode::ZScore));

  Rng rng(config.seed);
  auto& p = m.params;
  fill_uniform(p.char_embedding.data(), static_cast<std::size_t>(p.char_embedding.size()), 0.1, rng);
  init_lstm(p.char_fwd, rng);
  init_lstm(p.char_bwd, rng);
  fill_uniform(p.word_embedding.data(), static_cast<std::size_t>(p.word_embedding.size()), 0.1, rng);
  init_lstm(p.enc_fwd, rng);
  init_lstm(p.enc_bwd, rng);
  xavier(p.mlp_w1, m.fusion_dim(), config.mlp_hidden, rng);
  xavier(p.mlp_w2, config.mlp_hidden, 2, rng);

  if (pretrained && pretrained->dimension() > 0) {
    const auto d = static_cast<Eigen::Index>(pretrained->dimension());
    const auto dw = static_cast<Eigen::Index>(config.word_dim);
    MatrixXd proj;
    if (d != dw) {
      // Fixed random projection into the embedding width; rows stay trainable.
      Rng prng(derive_seed(config.seed, 0x50524F4A));
      proj.resize(dw, d);
      const double scale = 1.0 / std::sqrt(static_cast<double>(d));
      for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = prng.normal() * scale;
    }
    for (std::size_t w = 0; w < m.words.size(); ++w) {
      auto v = pretrained->lookup(m.words[w]);
      if (!v) continue;
      const Eigen::Map<const VectorXd> src(v->data(), d);
      p.word_embedding.row(static_cast<Eigen::Index>(w)) =
          (d == dw ? VectorXd(src) : VectorXd(proj * src)).transpose();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

struct CharTrace {
  std::vector<std::size_t> ids;
  BiLstmCache lstm;
};

struct BranchTrace {
  bool present = false;
  std::vector<std::optional<std::size_t>> word_ids;
  std::vector<CharTrace> chars;
  BiLstmCache enc;
  EncoderState state;
  VectorXd q;
  AttentionOutput att;
};

struct Trace {
  std::vector<BranchTrace> branches;
  VectorXd fusion;  // before dropout
  VectorXd mask;    // dropout multipliers, empty in eval mode
  VectorXd a1, h1, logits;
  std::array<double, 2> probs{};
};

VectorXd char_encode_impl(const std::string& word, const NeuralModel& m, CharTrace* trace) {
  const auto hc = static_cast<Eigen::Index>(m.config.char_hidden);
  auto cps = utf8_code_points(word);
  if (cps.size() > m.config.max_word_chars) cps.resize(m.config.max_word_chars);
  if (cps.empty()) return VectorXd::Zero(2 * hc);
  MatrixXd E(static_cast<Eigen::Index>(cps.size()), m.params.char_embedding.cols());
  std::vector<std::size_t> ids;
  for (std::size_t t = 0; t < cps.size(); ++t) {
    ids.push_back(m.char_id(cps[t]));
    E.row(static_cast<Eigen::Index>(t)) = m.params.char_embedding.row(static_cast<Eigen::Index>(ids.back()));
  }
  const EncoderState s = bilstm_encode(E, m.params.char_fwd, m.params.char_bwd,
                                       trace ? &trace->lstm : nullptr);
  if (trace) trace->ids = std::move(ids);
  VectorXd out(2 * hc);
  out.head(hc) = s.H.row(s.H.rows() - 1).head(hc).transpose();
  out.tail(hc) = s.H.row(0).tail(hc).transpose();
  return out;
}

void char_backward(const CharTrace& trace, const VectorXd& dout, const NeuralModel& m,
                   NeuralParams& g) {
  if (trace.ids.empty()) return;
  const auto hc = static_cast<Eigen::Index>(m.config.char_hidden);
  const auto n = static_cast<Eigen::Index>(trace.ids.size());
  MatrixXd dH = MatrixXd::Zero(n, 2 * hc);
  dH.row(n - 1).head(hc) = dout.head(hc).transpose();
  dH.row(0).tail(hc) += dout.tail(hc).transpose();
  MatrixXd dE;
  bilstm_backward(trace.lstm, dH, m.params.char_fwd, m.params.char_bwd, g.char_fwd, g.char_bwd, dE);
  for (Eigen::Index t = 0; t < n; ++t) {
    g.char_embedding.row(static_cast<Eigen::Index>(trace.ids[static_cast<std::size_t>(t)])) += dE.row(t);
  }
}

MatrixXd embed_impl(const std::vector<std::string>& tokens, const NeuralModel& m, BranchTrace* trace) {
  const auto dw = static_cast<Eigen::Index>(m.config.word_dim);
  const auto dc = static_cast<Eigen::Index>(2 * m.config.char_hidden);
  MatrixXd X(static_cast<Eigen::Index>(tokens.size()), dw + dc);
  if (trace) {
    trace->word_ids.clear();
    trace->chars.assign(tokens.size(), CharTrace{});
  }
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    const auto id = m.word_id(tokens[t]);
    if (id) {
      X.row(r).head(dw) = m.params.word_embedding.row(static_cast<Eigen::Index>(*id));
    } else {
      X.row(r).head(dw).setZero();
    }
    X.row(r).tail(dc) = char_encode_impl(tokens[t], m, trace ? &trace->chars[t] : nullptr).transpose();
    if (trace) trace->word_ids.push_back(id);
  }
  return X;
}

VectorXd encode_branch(const std::vector<std::string>& tokens, const NeuralModel& m, BranchTrace& b) {
  const auto z = static_cast<Eigen::Index>(2 * m.config.hidden);
  if (tokens.empty()) {
    b.present = false;
    return VectorXd::Zero(z);
  }
  b.present = true;
  const MatrixXd X = embed_impl(tokens, m, &b);
  b.state = bilstm_encode(X, m.params.enc_fwd, m.params.enc_bwd, &b.enc);
  b.q = b.state.final_state();
  b.att = attention_pool(b.state.H, b.q, m.config.attention, {}, static_cast<double>(z));
  return b.att.z;
}

void branch_backward(const BranchTrace& b, const VectorXd& dz, const NeuralModel& m, NeuralParams& g) {
  if (!b.present) return;
  const auto z = static_cast<Eigen::Index>(2 * m.config.hidden);
  const Eigen::Index n = b.state.H.rows();
  MatrixXd dH = MatrixXd::Zero(n, z);
  VectorXd dq = VectorXd::Zero(z);
  attention_backward(b.state.H, b.q, m.config.attention, static_cast<double>(z), b.att, dz, dH, dq);
  dH.row(n - 1) += dq.transpose();
  MatrixXd dX;
  bilstm_backward(b.enc, dH, m.params.enc_fwd, m.params.enc_bwd, g.enc_fwd, g.enc_bwd, dX);
  const auto dw = static_cast<Eigen::Index>(m.config.word_dim);
  const auto dc = static_cast<Eigen::Index>(2 * m.config.char_hidden);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& id = b.word_ids[static_cast<std::size_t>(t)];
    if (id) g.word_embedding.row(static_cast<Eigen::Index>(*id)) += dX.row(t).head(dw);
    char_backward(b.chars[static_cast<std::size_t>(t)], dX.row(t).tail(dc).transpose(), m, g);
  }
}

VectorXd scaled_features(const ContextBundle& bundle, const NeuralModel& m, features::FlagPolicy flags) {
  const auto v = features::handcrafted_features(bundle, flags).values();
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] =
        m.feature_scaler.dimension() == v.size() ? m.feature_scaler.transform(i, v[i]) : v[i];
  }
  return out;
}

void run_forward(const ContextBundle& bundle, const NeuralModel& m, const ForwardOptions& opt, Trace& tr) {
  const auto cur_tokens = textrep::tokenize(bundle.cur_sentence.text);
  if (cur_tokens.empty()) {
    throw Error(ErrorCode::EmptyInput, "sentence '" + bundle.cur_sentence.id + "' has no tokens");
  }
  const auto z = static_cast<Eigen::Index>(2 * m.config.hidden);
  tr.fusion.resize(static_cast<Eigen::Index>(m.fusion_dim()));
  if (m.config.contextual) {
    tr.branches.assign(4, BranchTrace{});
    const std::vector<std::string> none;
    tr.fusion.segment(0, z) = encode_branch(textrep::tokenize(bundle.section_type), m, tr.branches[0]);
    tr.fusion.segment(z, z) = encode_branch(
        bundle.prev_sentence ? textrep::tokenize(bundle.prev_sentence->text) : none, m, tr.branches[1]);
    tr.fusion.segment(2 * z, z) = encode_branch(cur_tokens, m, tr.branches[2]);
    tr.fusion.segment(3 * z, z) = encode_branch(
        bundle.next_sentence ? textrep::tokenize(bundle.next_sentence->text) : none, m, tr.branches[3]);
    tr.fusion.tail(static_cast<Eigen::Index>(features::HandcraftedFeatures::kCount)) =
        scaled_features(bundle, m, opt.flags);
  } else {
    tr.branches.assign(1, BranchTrace{});
    tr.fusion = encode_branch(cur_tokens, m, tr.branches[0]);
  }

  VectorXd u = tr.fusion;
  tr.mask.resize(0);
  if (opt.training && m.config.dropout > 0.0) {
    if (!opt.dropout_rng) throw Error(ErrorCode::InvalidArgument, "training forward needs a dropout rng");
    const double keep = 1.0 - m.config.dropout;
    tr.mask.resize(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      tr.mask[i] = opt.dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
    }
    u = u.cwiseProduct(tr.mask);
  }
  tr.a1 = m.params.mlp_w1 * u + m.params.mlp_b1;
  tr.h1 = tr.a1.cwiseMax(0.0);
  tr.logits = m.params.mlp_w2 * tr.h1 + m.params.mlp_b2;
  const double mx = tr.logits.maxCoeff();
  const double e0 = std::exp(tr.logits[0] - mx), e1 = std::exp(tr.logits[1] - mx);
  tr.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
}

// -log softmax(logits)[label]
double nll(const VectorXd& logits, int label) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
  return lse - logits[label];
}

void run_backward(const Trace& tr, int label, double scale, const NeuralModel& m, NeuralParams& g) {
  VectorXd dlogits(2);
  dlogits << tr.probs[0], tr.probs[1];
  dlogits[label] -= 1.0;
  dlogits *= scale;
  g.mlp_w2.noalias() += dlogits * tr.h1.transpose();
  g.mlp_b2 += dlogits;
  VectorXd da1 = m.params.mlp_w2.transpose() * dlogits;
  for (Eigen::Index i = 0; i < da1.size(); ++i) {
    if (tr.a1[i] <= 0.0) da1[i] = 0.0;
  }
  const VectorXd u = tr.mask.size() ? VectorXd(tr.fusion.cwiseProduct(tr.mask)) : tr.fusion;
  g.mlp_w1.noalias() += da1 * u.transpose();
  g.mlp_b1 += da1;
  VectorXd du = m.params.mlp_w1.transpose() * da1;
  if (tr.mask.size()) du = du.cwiseProduct(tr.mask);
  const auto z = static_cast<Eigen::Index>(2 * m.config.hidden);
  for (std::size_t k = 0; k < tr.branches.size(); ++k) {
    branch_backward(tr.branches[k], du.segment(static_cast<Eigen::Index>(k) * z, z), m, g);
  }
}

double data_loss(std::span<const ContextBundle> batch, const NeuralModel& m) {
  double s = 0;
  Trace tr;
  for (const auto& b : batch) {
    run_forward(b, m, {}, tr);
    s += nll(tr.logits, b.cur_sentence.label ? 1 : 0);
  }
  return s / static_cast<double>(batch.size());
}

}  // namespace

VectorXd char_encode(const std::string& word, const NeuralModel& model) {
  return char_encode_impl(word, model, nullptr);
}

MatrixXd embed_tokens(const std::vector<std::string>& tokens, const NeuralModel& model) {
  return embed_impl(tokens, model, nullptr);
}

std::array<double, 2> forward(const ContextBundle& bundle, const NeuralModel& model,
                              const ForwardOptions& options) {
  Trace tr;
  run_forward(bundle, model, options, tr);
  return tr.probs;
}

std::vector<double> predict_proba(std::span<const ContextBundle> bundles, const NeuralModel& model,
                                  features::FlagPolicy flags) {
  std::vector<double> out;
  out.reserve(bundles.size());
  ForwardOptions opt;
  opt.flags = flags;
  for (const auto& b : bundles) out.push_back(forward(b, model, opt)[1]);
  return out;
}

double cross_entropy(std::span<const std::array<double, 2>> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "probabilities vs labels");
  if (probs.empty()) throw Error(ErrorCode::EmptyInput, "empty batch");
  double s = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i][labels[i] ? 1 : 0];
    s -= p > 0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  }
  return s / static_cast<double>(probs.size());
}

double loss(std::span<const ContextBundle> batch, const NeuralModel& model, double lambda) {
  if (batch.empty()) throw Error(ErrorCode::EmptyInput, "empty batch");
  return data_loss(batch, model) + lambda * model.params.squared_norm();
}

LossParts loss_and_gradient(std::span<const ContextBundle> batch, const NeuralModel& model,
                            double lambda, NeuralParams& grad, const ForwardOptions& options) {
  if (batch.empty()) throw Error(ErrorCode::EmptyInput, "empty batch");
  LossParts parts;
  const double scale = 1.0 / static_cast<double>(batch.size());
  Trace tr;
  for (const auto& b : batch) {
    run_forward(b, model, options, tr);
    const int label = b.cur_sentence.label ? 1 : 0;
    parts.data += nll(tr.logits, label);
    run_backward(tr, label, scale, model, grad);
  }
  parts.data *= scale;
  if (lambda != 0.0) {
    auto gt = grad.tensors();
    auto pt = const_cast<NeuralParams&>(model.params).tensors();
    double sq = 0;
    for (std::size_t k = 0; k < pt.size(); ++k) {
      for (std::size_t i = 0; i < pt[k].size; ++i) {
        sq += pt[k].data[i] * pt[k].data[i];
        gt[k].data[i] += 2.0 * lambda * pt[k].data[i];
      }
    }
    parts.l2 = lambda * sq;
  }
  return parts;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const NeuralModel& model, std::span<const ContextBundle> batch,
                           const GradCheckOptions& options) {
  NeuralModel m = model;
  NeuralParams grad = m.params.zeros_like();
  loss_and_gradient(batch, m, options.lambda, grad, {});

  auto pt = m.params.tensors();
  auto gt = grad.tensors();
  GradCheckResult result;
  const double eps = options.epsilon;
  for (std::size_t k = 0; k < pt.size(); ++k) {
    GroupError ge;
    ge.group = pt[k].name;
    const double sign = pt[k].name == options.corrupt_group ? -1.0 : 1.0;
    std::vector<std::size_t> coords;
    if (pt[k].size <= options.samples_per_group) {
      for (std::size_t i = 0; i < pt[k].size; ++i) coords.push_back(i);
    } else {
      Rng rng(derive_seed(options.seed, k));
      std::set<std::size_t> picked;
      while (picked.size() < options.samples_per_group) picked.insert(rng.uniform_index(pt[k].size));
      coords.assign(picked.begin(), picked.end());
    }
    for (std::size_t i : coords) {
      double& theta = pt[k].data[i];
      const double saved = theta;
      auto diff = [&](double h) {
        theta = saved + h;
        const double lp = data_loss(batch, m);
        theta = saved - h;
        const double lm = data_loss(batch, m);
        theta = saved;
        return lp - lm;
      };
      double numeric = diff(eps) / (2 * eps);
      // The penalty is differenced on its own so its small contribution is
      // not lost in the rounding of the much larger data term.
      const double rp = options.lambda * (saved + eps) * (saved + eps);
      const double rm = options.lambda * (saved - eps) * (saved - eps);
      numeric += (rp - rm) / (2 * eps);
      const double analytic = sign * gt[k].data[i];
      ge.max_relative_error = std::max(ge.max_relative_error, relative_error(analytic, numeric));
      ++ge.checked;
    }
    result.max_relative_error = std::max(result.max_relative_error, ge.max_relative_error);
    result.groups.push_back(std::move(ge));
  }
  return result;
}

}  // namespace citeworth::neural
