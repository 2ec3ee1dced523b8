#include <algorithm>
#include <cmath>

#include "citeworth/error.hpp"
#include "citeworth/eval.hpp"
#include "citeworth/linear.hpp"
#include "citeworth/rng.hpp"

namespace citeworth::linear {

namespace {

// log(1 + e^z) without overflow.
double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

double penalty(const Eigen::VectorXd& beta, double alpha, double lambda) {
  if (lambda == 0.0) return 0.0;
  return lambda * ((1.0 - alpha) / 2.0 * beta.squaredNorm() + alpha * beta.lpNorm<1>());
}

double coord_penalty(double b, double alpha, double lambda) {
  return lambda * ((1.0 - alpha) / 2.0 * b * b + alpha * std::abs(b));
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix select_rows(const Matrix& X, std::span<const std::size_t> rows) {
  RowMatrix R = X;
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= static_cast<std::size_t>(X.rows())) {
      throw Error(ErrorCode::IndexOutOfRange, "select_rows: row out of range");
    }
    for (RowMatrix::InnerIterator it(R, static_cast<Eigen::Index>(rows[r])); it; ++it) {
      triplets.emplace_back(static_cast<Eigen::Index>(r), it.col(), it.value());
    }
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

void check_training_data(const Matrix& X, std::span<const int> y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "design matrix has " + std::to_string(X.rows()) +
                                               " rows but " + std::to_string(y.size()) + " labels");
  }
  std::size_t pos = 0;
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    pos += static_cast<std::size_t>(v);
  }
  if (pos == 0 || pos == y.size()) {
    throw Error(ErrorCode::SingleClass, "training data needs both classes");
  }
}

double enlr_objective(const EnlrModel& model, const Matrix& X, std::span<const int> y) {
  const Eigen::VectorXd eta = (X * model.beta).array() + model.intercept;
  double loss = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    loss += log1pexp(eta[i]) - static_cast<double>(y[static_cast<std::size_t>(i)]) * eta[i];
  }
  return loss / static_cast<double>(y.size()) + penalty(model.beta, model.alpha, model.lambda);
}

double lambda_max(const Matrix& X, std::span<const int> y, double alpha) {
  const double n = static_cast<double>(y.size());
  double ybar = 0;
  for (int v : y) ybar += v;
  ybar /= n;
  Eigen::VectorXd r(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) r[static_cast<Eigen::Index>(i)] = y[i] - ybar;
  const Eigen::VectorXd g = X.transpose() * r;
  const double m = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
  return m / (n * std::max(alpha, 1e-3));
}

EnlrModel fit_enlr(const Matrix& X, std::span<const int> y, const EnlrParams& params,
                   const EnlrModel* warm, std::vector<double>* objective_trace) {
  check_training_data(X, y);
  if (!(params.alpha >= 0.0 && params.alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
  }
  if (!(params.lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");

  const auto n = static_cast<Eigen::Index>(y.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  const double alpha = params.alpha;
  const double lambda = params.lambda;

  EnlrModel model;
  model.alpha = alpha;
  model.lambda = lambda;
  if (warm && warm->beta.size() == X.cols()) {
    model.beta = warm->beta;
    model.intercept = warm->intercept;
  } else {
    model.beta = Eigen::VectorXd::Zero(X.cols());
    double ybar = 0;
    for (int v : y) ybar += v;
    ybar *= inv_n;
    model.intercept = std::log(ybar / (1.0 - ybar));
  }

  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)];
  Eigen::VectorXd eta = (X * model.beta).array() + model.intercept;

  // Column curvature bounds for the fallback majorization step.
  Eigen::VectorXd col_sq(X.cols());
  for (Eigen::Index j = 0; j < X.outerSize(); ++j) {
    double s = 0;
    for (Matrix::InnerIterator it(X, j); it; ++it) s += it.value() * it.value();
    col_sq[j] = s;
  }

  // Change of the smooth loss (times n) when eta moves by delta*x_j.
  auto column_loss_delta = [&](Eigen::Index j, double delta) {
    double d = 0;
    for (Matrix::InnerIterator it(X, j); it; ++it) {
      const double e = eta[it.row()];
      const double s = delta * it.value();
      d += log1pexp(e + s) - log1pexp(e) - yv[it.row()] * s;
    }
    return d;
  };

  for (std::size_t sweep = 1; sweep <= params.max_sweeps; ++sweep) {
    double max_change = 0;

    // Intercept: Newton, falling back to the 1/4-curvature bound.
    {
      double g = 0, h = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = sigmoid(eta[i]);
        g += p - yv[i];
        h += p * (1 - p);
      }
      auto loss_at = [&](double delta) {
        double d = 0;
        for (Eigen::Index i = 0; i < n; ++i) d += log1pexp(eta[i] + delta) - yv[i] * delta;
        return d;
      };
      double delta = h > 1e-12 ? -g / h : 0.0;
      const double base = loss_at(0.0);
      if (delta != 0.0 && loss_at(delta) > base) delta = -4.0 * g / static_cast<double>(n);
      if (loss_at(delta) > base) delta = 0.0;
      if (delta != 0.0) {
        model.intercept += delta;
        eta.array() += delta;
        max_change = std::max(max_change, std::abs(delta));
      }
    }

    for (Eigen::Index j = 0; j < X.outerSize(); ++j) {
      if (col_sq[j] == 0.0) {
        if (model.beta[j] != 0.0) {
          max_change = std::max(max_change, std::abs(model.beta[j]));
          model.beta[j] = 0.0;
        }
        continue;
      }
      double g = 0, h = 0;
      for (Matrix::InnerIterator it(X, j); it; ++it) {
        const double p = sigmoid(eta[it.row()]);
        g += it.value() * (p - yv[it.row()]);
        h += it.value() * it.value() * p * (1 - p);
      }
      g *= inv_n;
      h *= inv_n;
      const double old = model.beta[j];
      const double l1 = lambda * alpha;
      const double l2 = lambda * (1.0 - alpha);

      auto objective_delta = [&](double b) {
        return column_loss_delta(j, b - old) * inv_n + coord_penalty(b, alpha, lambda) -
               coord_penalty(old, alpha, lambda);
      };

      double next = old;
      if (h + l2 > 1e-14) next = soft_threshold(h * old - g, l1) / (h + l2);
      if (next != old && objective_delta(next) > 0.0) {
        const double L = 0.25 * col_sq[j] * inv_n;
        next = soft_threshold(L * old - g, l1) / (L + l2);
        if (objective_delta(next) > 0.0) next = old;
      }
      if (next != old) {
        const double delta = next - old;
        for (Matrix::InnerIterator it(X, j); it; ++it) eta[it.row()] += delta * it.value();
        model.beta[j] = next;
        max_change = std::max(max_change, std::abs(delta));
      }
    }

    if (!std::isfinite(model.intercept) || !model.beta.allFinite()) {
      throw Error(ErrorCode::NonFinite, "coordinate descent diverged at sweep " + std::to_string(sweep));
    }
    model.sweeps = sweep;
    if (objective_trace) objective_trace->push_back(enlr_objective(model, X, y));
    if (max_change < params.tolerance) {
      model.converged = true;
      break;
    }
  }
  return model;
}

std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  std::vector<std::size_t> fold(y.size(), 0);
  Rng rng(seed);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == cls) idx.push_back(i);
    }
    rng.shuffle(idx);
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = k % folds;
  }
  return fold;
}

EnlrModel train_enlr(const Matrix& X, std::span<const int> y, const EnlrCvConfig& config,
                     CvResult* result) {
  check_training_data(X, y);
  if (config.alpha_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty alpha grid");

  std::size_t positives = 0;
  for (int v : y) positives += static_cast<std::size_t>(v);
  const std::size_t folds =
      std::min(config.folds, std::min(positives, y.size() - positives));
  if (folds < 2) {
    throw Error(ErrorCode::InsufficientData, "each class needs at least 2 rows for cross-validation");
  }
  const auto fold = stratified_folds(y, folds, config.seed);

  auto lambdas_for = [&](double alpha) {
    std::vector<double> out = config.lambda_grid;
    if (out.empty()) {
      const double lmax = lambda_max(X, y, alpha);
      for (double r : config.lambda_ratios) out.push_back(r * lmax);
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
  };

  CvResult cv;
  bool have_best = false;
  for (double alpha : config.alpha_grid) {
    const auto lambdas = lambdas_for(alpha);
    std::vector<double> f1_sum(lambdas.size(), 0.0);
    for (std::size_t k = 0; k < folds; ++k) {
      std::vector<std::size_t> tr, te;
      for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == k ? te : tr).push_back(i);
      const Matrix Xtr = select_rows(X, tr);
      const Matrix Xte = select_rows(X, te);
      std::vector<int> ytr, yte;
      for (auto i : tr) ytr.push_back(y[i]);
      for (auto i : te) yte.push_back(y[i]);
      EnlrModel warm;
      bool have_warm = false;
      for (std::size_t l = 0; l < lambdas.size(); ++l) {
        EnlrParams p{alpha, lambdas[l], config.tolerance, config.max_sweeps};
        EnlrModel m = fit_enlr(Xtr, ytr, p, have_warm ? &warm : nullptr);
        const auto probs = predict_enlr(m, Xte);
        f1_sum[l] += eval::prf1(eval::decide(probs, config.threshold), yte).f1;
        warm = std::move(m);
        have_warm = true;
      }
    }
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      CvPoint pt{alpha, lambdas[l], f1_sum[l] / static_cast<double>(folds)};
      cv.grid.push_back(pt);
      if (!have_best || pt.mean_f1 > cv.best.mean_f1 + 1e-12) {
        cv.best = pt;
        have_best = true;
      }
    }
  }

  // Refit on everything along the same path down to the chosen lambda.
  EnlrModel model;
  bool have_warm = false;
  for (double lam : lambdas_for(cv.best.alpha)) {
    if (lam < cv.best.lambda) break;
    EnlrParams p{cv.best.alpha, lam, config.tolerance, config.max_sweeps};
    model = fit_enlr(X, y, p, have_warm ? &model : nullptr);
    have_warm = true;
  }
  if (result) *result = std::move(cv);
  return model;
}

double predict_enlr(const EnlrModel& model, const textrep::SparseVector& x) {
  if (x.dimension != static_cast<std::size_t>(model.beta.size())) {
    throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(x.dimension) +
                                                  " features, model " +
                                                  std::to_string(model.beta.size()));
  }
  double z = model.intercept;
  for (std::size_t i = 0; i < x.nnz(); ++i) z += model.beta[x.indices[i]] * x.values[i];
  return sigmoid(z);
}

double predict_enlr(const EnlrModel& model, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(model.beta.size())) {
    throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(x.size()) +
                                                  " features, model " +
                                                  std::to_string(model.beta.size()));
  }
  double z = model.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) z += model.beta[static_cast<Eigen::Index>(j)] * x[j];
  return sigmoid(z);
}

std::vector<double> predict_enlr(const EnlrModel& model, const Matrix& X) {
  if (X.cols() != model.beta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "design matrix width differs from the model");
  }
  const Eigen::VectorXd eta = (X * model.beta).array() + model.intercept;
  std::vector<double> out(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i) out[static_cast<std::size_t>(i)] = sigmoid(eta[i]);
  return out;
}

}  // namespace citeworth::linear
