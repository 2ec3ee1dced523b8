#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "citeworth/error.hpp"
#include "citeworth/eval.hpp"
#include "citeworth/neural.hpp"

namespace citeworth::neural {

Adam::Adam(const NeuralParams& shape, const TrainConfig& config)
    : m_(shape.zeros_like()), v_(shape.zeros_like()), config_(config) {}

void Adam::step(NeuralParams& params, NeuralParams& grad) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto p = params.tensors();
  auto g = grad.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].size != g[k].size || p[k].size != m[k].size) {
      throw Error(ErrorCode::DimensionMismatch, "adam: tensor '" + p[k].name + "' changed shape");
    }
    for (std::size_t i = 0; i < p[k].size; ++i) {
      const double gi = g[k].data[i];
      m[k].data[i] = b1 * m[k].data[i] + (1 - b1) * gi;
      v[k].data[i] = b2 * v[k].data[i] + (1 - b2) * gi * gi;
      const double mh = m[k].data[i] / c1, vh = v[k].data[i] / c2;
      p[k].data[i] -= config_.learning_rate * mh / (std::sqrt(vh) + config_.epsilon);
    }
  }
}

namespace {

bool all_finite(NeuralParams& p) {
  for (auto& t : p.tensors()) {
    for (std::size_t i = 0; i < t.size; ++i) {
      if (!std::isfinite(t.data[i])) return false;
    }
  }
  return true;
}

}  // namespace

TrainHistory train(NeuralModel& model, const TrainConfig& config,
                   std::span<const ContextBundle> train_set,
                   std::span<const ContextBundle> validation_set, const EpochObserver& observer) {
  if (train_set.empty()) throw Error(ErrorCode::InsufficientData, "empty training set");
  if (validation_set.empty()) throw Error(ErrorCode::InsufficientData, "empty validation set");
  if (config.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  if (!(config.learning_rate > 0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");

  Rng order_rng(derive_seed(config.seed, 1));
  Rng drop_rng(derive_seed(config.seed, 2));
  Adam adam(model.params, config);
  NeuralParams grad = model.params.zeros_like();
  NeuralParams best = model.params;
  NeuralParams last_good = model.params;
  double best_f1 = -1.0;
  std::size_t since_best = 0;

  std::vector<int> val_labels;
  for (const auto& b : validation_set) val_labels.push_back(b.cur_sentence.label ? 1 : 0);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<ContextBundle> batch;

  TrainHistory history;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
      grad.set_zero();
      ForwardOptions opt;
      opt.training = true;
      opt.dropout_rng = &drop_rng;
      const LossParts parts = loss_and_gradient(batch, model, model.config.l2, grad, opt);
      if (!std::isfinite(parts.total()) || !all_finite(grad)) {
        model.params = last_good;
        history.diverged = true;
        history.message = "non-finite loss in epoch " + std::to_string(epoch);
        break;
      }
      last_good = model.params;
      adam.step(model.params, grad);
      loss_sum += parts.total();
      ++batches;
    }
    if (history.diverged) break;

    const auto probs = predict_proba(validation_set, model);
    const auto m = eval::prf1(eval::decide(probs, config.threshold), val_labels);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), m.precision, m.recall, m.f1};
    history.epochs.push_back(rec);
    if (observer) observer(rec);
    if (m.f1 > best_f1) {
      best_f1 = m.f1;
      best = model.params;
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      history.stopped_early = true;
      break;
    }
  }
  if (!history.diverged && !history.epochs.empty()) model.params = best;
  return history;
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream out;
  out << "epoch,train_loss,validation_precision,validation_recall,validation_f1\n";
  char buf[160];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.train_loss,
                  e.validation_precision, e.validation_recall, e.validation_f1);
    out << buf;
  }
  return out.str();
}

}  // namespace citeworth::neural
