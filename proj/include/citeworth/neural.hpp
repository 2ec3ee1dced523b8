#pragma once

// Attention-based BiLSTM classifier: character BiLSTM word encoder, word
// embeddings, a shared BiLSTM sentence encoder with attention pooling,
// contextual fusion and an MLP head, with hand-written backpropagation.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "citeworth/features.hpp"
#include "citeworth/rng.hpp"
#include "citeworth/textrep.hpp"

namespace citeworth::neural {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using features::ContextBundle;

// ---------------------------------------------------------------------------
// LSTM

/// Gate blocks are stacked in the order input, forget, cell, output:
/// rows [0,h) = i, [h,2h) = f, [2h,3h) = g, [3h,4h) = o.
struct LstmParams {
  MatrixXd Wx;  // 4h x d
  MatrixXd Wh;  // 4h x h
  VectorXd b;   // 4h

  static LstmParams zeros(std::size_t input, std::size_t hidden);
  std::size_t hidden() const { return static_cast<std::size_t>(Wh.cols()); }
  std::size_t input() const { return static_cast<std::size_t>(Wx.cols()); }
};

struct LstmState {
  VectorXd h;
  VectorXd c;
};

/// One step: i,f,o = sigmoid(.), g = tanh(.), c = f*c_prev + i*g, h = o*tanh(c).
LstmState lstm_step(const VectorXd& x, const VectorXd& h_prev, const VectorXd& c_prev,
                    const LstmParams& p);

/// Per-step activations kept for backpropagation (row t = step t).
struct LstmCache {
  MatrixXd X, H, C, I, F, G, O;
};

/// Runs over the rows of X (n x d); returns H (n x h).
MatrixXd lstm_forward(const MatrixXd& X, const LstmParams& p, LstmCache* cache = nullptr);

/// Accumulates parameter gradients into `grad` and writes dL/dX into `dX`.
void lstm_backward(const LstmCache& cache, const MatrixXd& dH, const LstmParams& p,
                   LstmParams& grad, MatrixXd& dX);

struct BiLstmCache {
  LstmCache fwd, bwd;
};

struct EncoderState {
  MatrixXd H;  // n x 2h: forward states then backward states, per token
  VectorXd final_state() const { return H.row(H.rows() - 1).transpose(); }
};

EncoderState bilstm_encode(const MatrixXd& X, const LstmParams& fwd, const LstmParams& bwd,
                           BiLstmCache* cache = nullptr);

void bilstm_backward(const BiLstmCache& cache, const MatrixXd& dH, const LstmParams& fwd,
                     const LstmParams& bwd, LstmParams& grad_fwd, LstmParams& grad_bwd,
                     MatrixXd& dX);

// ---------------------------------------------------------------------------
// Attention

enum class AttentionVariant { Cos, Dp, Sdp };

std::string_view to_string(AttentionVariant v);
AttentionVariant attention_from_string(std::string_view s);

/// cos: q.k/(|q||k|) (0 when a norm vanishes); dp: q.k; sdp: q.k/sqrt(d_k).
double attention_score(const VectorXd& q, const VectorXd& k, AttentionVariant v, double d_k);

struct AttentionOutput {
  VectorXd z;
  VectorXd alpha;
  VectorXd scores;
};

/// Softmax over per-row scores of H against q; keys and values are the rows
/// of H. Rows with mask[i] == false get weight 0. d_k <= 0 means q.size().
AttentionOutput attention_pool(const MatrixXd& H, const VectorXd& q, AttentionVariant v,
                               std::span<const bool> mask = {}, double d_k = 0.0);

/// Backward pass of attention_pool given dL/dz. Adds into dH and dq.
void attention_backward(const MatrixXd& H, const VectorXd& q, AttentionVariant v, double d_k,
                        const AttentionOutput& out, const VectorXd& dz, MatrixXd& dH,
                        VectorXd& dq);

// ---------------------------------------------------------------------------
// Model

struct NeuralConfig {
  std::size_t char_embedding_dim = 15;
  std::size_t char_hidden = 15;
  std::size_t word_dim = 128;
  std::size_t hidden = 128;
  std::size_t mlp_hidden = 64;
  std::size_t max_word_chars = 32;
  std::size_t word_min_count = 1;
  AttentionVariant attention = AttentionVariant::Cos;
  bool contextual = true;
  double dropout = 0.5;
  double l2 = 1e-7;
  std::uint64_t seed = 0;
};

/// Every trainable tensor. Gradients use the same type.
struct NeuralParams {
  MatrixXd char_embedding;  // chars x char_embedding_dim (row 0 = unknown)
  LstmParams char_fwd, char_bwd;
  MatrixXd word_embedding;  // words x word_dim
  LstmParams enc_fwd, enc_bwd;
  MatrixXd mlp_w1;          // mlp_hidden x fusion
  VectorXd mlp_b1;
  MatrixXd mlp_w2;          // 2 x mlp_hidden
  VectorXd mlp_b2;

  struct Tensor {
    std::string name;
    double* data;
    std::size_t size;
  };
  std::vector<Tensor> tensors();
  std::vector<std::pair<std::string, const double*>> const_tensors() const;

  NeuralParams zeros_like() const;
  void set_zero();
  double squared_norm() const;
  std::size_t count() const;
};

struct NeuralModel {
  NeuralConfig config;
  std::vector<char32_t> chars;  // index i+1 in char_embedding
  std::unordered_map<char32_t, std::size_t> char_index;
  std::vector<std::string> words;
  std::unordered_map<std::string, std::size_t> word_index;
  features::Scaler feature_scaler;  // z-scores the 8 handcrafted features
  NeuralParams params;

  std::size_t fusion_dim() const;
  std::optional<std::size_t> word_id(const std::string& w) const;
  std::size_t char_id(char32_t c) const;  // 0 when unknown
  std::uint64_t word_vocab_hash() const;
  std::uint64_t char_vocab_hash() const;
  void rebuild_indexes();
};

/// Builds vocabularies from the training bundles (all four branches), fits the
/// feature scaler on training features and initializes parameters (seeded).
/// Word rows present in `pretrained` are copied, or mapped through a fixed
/// seeded random projection when the dimension differs.
NeuralModel init_model(const NeuralConfig& config, std::span<const ContextBundle> train,
                       const textrep::EmbeddingTable* pretrained = nullptr);

/// Model with the given vocabularies and all parameters zero.
NeuralModel zero_model(const NeuralConfig& config, std::vector<std::string> words,
                       std::vector<char32_t> chars);

std::vector<char32_t> utf8_code_points(std::string_view s);

/// Concatenated final forward/backward states of the character BiLSTM
/// (length 2 * char_hidden); zero vector for an empty word.
VectorXd char_encode(const std::string& word, const NeuralModel& model);

/// One row per token: word vector (zero when absent) then char encoding.
MatrixXd embed_tokens(const std::vector<std::string>& tokens, const NeuralModel& model);

struct ForwardOptions {
  bool training = false;  // enables dropout, drawn from dropout_rng
  Rng* dropout_rng = nullptr;
  features::FlagPolicy flags = features::FlagPolicy::FromLabels;
};

/// Class probabilities (non-citing, citing). Throws Error{EmptyInput} when
/// the current sentence has no tokens.
std::array<double, 2> forward(const ContextBundle& bundle, const NeuralModel& model,
                              const ForwardOptions& options = {});

/// P(citing) for each bundle, evaluation mode.
std::vector<double> predict_proba(std::span<const ContextBundle> bundles, const NeuralModel& model,
                                  features::FlagPolicy flags = features::FlagPolicy::FromLabels);

/// Mean cross-entropy of predicted class probabilities.
double cross_entropy(std::span<const std::array<double, 2>> probs, std::span<const int> labels);

/// Mean cross-entropy over the batch plus lambda * sum(theta^2), eval mode.
double loss(std::span<const ContextBundle> batch, const NeuralModel& model, double lambda);

struct LossParts {
  double data = 0;  // mean cross-entropy
  double l2 = 0;    // lambda * sum(theta^2)
  double total() const { return data + l2; }
};

/// Loss and its gradient (accumulated into `grad`, which must be shaped like
/// model.params).
LossParts loss_and_gradient(std::span<const ContextBundle> batch, const NeuralModel& model,
                            double lambda, NeuralParams& grad, const ForwardOptions& options = {});

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t samples_per_group = 200;
  std::uint64_t seed = 0;
  double lambda = 1e-7;
  std::string corrupt_group;  // flips the sign of this group's analytic gradient
};

struct GroupError {
  std::string group;
  double max_relative_error = 0;
  std::size_t checked = 0;
};

struct GradCheckResult {
  std::vector<GroupError> groups;
  double max_relative_error = 0;
};

/// |a - n| / max(|a|, |n|, 1e-12)
double relative_error(double analytic, double numeric);

/// Central differences in evaluation mode on a seeded sample of coordinates
/// in every parameter group.
GradCheckResult grad_check(const NeuralModel& model, std::span<const ContextBundle> batch,
                           const GradCheckOptions& options = {});

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t patience = 3;
  std::size_t max_epochs = 50;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double train_loss = 0;
  double validation_precision = 0;
  double validation_recall = 0;
  double validation_f1 = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  bool diverged = false;  // a non-finite loss ended training
  std::string message;
};

class Adam {
 public:
  Adam(const NeuralParams& shape, const TrainConfig& config);
  void step(NeuralParams& params, NeuralParams& grad);
  std::size_t steps() const { return t_; }

 private:
  NeuralParams m_, v_;
  TrainConfig config_;
  std::size_t t_ = 0;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Adam on shuffled minibatches; validation F1 (citing class) after each
/// epoch; stops after `patience` epochs without improvement and restores the
/// best parameters. A non-finite loss stops training with the last finite
/// parameters and sets history.diverged.
TrainHistory train(NeuralModel& model, const TrainConfig& config,
                   std::span<const ContextBundle> train_set,
                   std::span<const ContextBundle> validation_set,
                   const EpochObserver& observer = {});

std::string history_csv(const TrainHistory& history);

}  // namespace citeworth::neural
