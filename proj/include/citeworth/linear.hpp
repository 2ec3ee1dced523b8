#pragma once

// Interpretable models: elastic-net logistic regression (coordinate descent)
// and a random forest of Gini trees, plus the importance/direction report.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "citeworth/textrep.hpp"

namespace citeworth::linear {

/// Design matrix: rows are examples, column-major storage.
using Matrix = Eigen::SparseMatrix<double>;
using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Numerically stable logistic function.
double sigmoid(double z);

/// Rows `rows` of X, in that order.
Matrix select_rows(const Matrix& X, std::span<const std::size_t> rows);

/// Throws Error{SingleClass} / Error{LengthMismatch} / Error{InvalidArgument}.
void check_training_data(const Matrix& X, std::span<const int> y);

// ---------------------------------------------------------------------------
// Elastic-net logistic regression

struct EnlrModel {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double alpha = 1.0;   // L1 share of the penalty
  double lambda = 0.0;  // penalty strength
  std::vector<std::string> feature_names;
  std::size_t sweeps = 0;
  bool converged = false;
};

struct EnlrParams {
  double alpha = 1.0;
  double lambda = 0.0;
  double tolerance = 1e-6;  // on max |coefficient change| per sweep
  std::size_t max_sweeps = 1000;
};

/// Objective minimized by fit_enlr:
///   (1/n) sum_i [log(1 + exp(eta_i)) - y_i eta_i]
///     + lambda * ((1 - alpha)/2 * |beta|^2 + alpha * |beta|_1),
/// eta_i = beta.x_i + b. The intercept is not penalized.
double enlr_objective(const EnlrModel& model, const Matrix& X, std::span<const int> y);

/// Smallest lambda at which every coefficient is zero:
/// max_j |X_j^T (y - ybar)| / (n * alpha). alpha below 1e-3 is clamped.
double lambda_max(const Matrix& X, std::span<const int> y, double alpha);

/// Coordinate descent for one (alpha, lambda). `warm` (optional) supplies the
/// starting point; `objective_trace` receives the objective after every sweep.
/// Throws Error{SingleClass}, Error{NonFinite}.
EnlrModel fit_enlr(const Matrix& X, std::span<const int> y, const EnlrParams& params,
                   const EnlrModel* warm = nullptr, std::vector<double>* objective_trace = nullptr);

struct EnlrCvConfig {
  std::vector<double> alpha_grid{0.1, 0.5, 0.9, 1.0};
  // Explicit lambda values; when empty, lambda_ratios times lambda_max(alpha).
  std::vector<double> lambda_grid{};
  std::vector<double> lambda_ratios{1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001};
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  double tolerance = 1e-6;
  std::size_t max_sweeps = 1000;
};

struct CvPoint {
  double alpha = 0;
  double lambda = 0;
  double mean_f1 = 0;
};

struct CvResult {
  std::vector<CvPoint> grid;
  CvPoint best;
};

/// Stratified, seeded folds; picks the grid point with the best mean
/// held-out F1 on the citing class (ties keep the earlier, larger lambda),
/// then refits on all rows.
EnlrModel train_enlr(const Matrix& X, std::span<const int> y, const EnlrCvConfig& config,
                     CvResult* result = nullptr);

/// Stratified fold id for every row.
std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds,
                                          std::uint64_t seed);

/// sigma(beta.x + b). Throws Error{DimensionMismatch}.
double predict_enlr(const EnlrModel& model, const textrep::SparseVector& x);
double predict_enlr(const EnlrModel& model, std::span<const double> x);
std::vector<double> predict_enlr(const EnlrModel& model, const Matrix& X);

// ---------------------------------------------------------------------------
// Random forest

struct RfParams {
  std::size_t trees = 100;
  std::size_t max_features = 0;  // 0 -> floor(sqrt(m)), at least 1
  bool bootstrap = true;
  std::size_t max_depth = 0;     // 0 -> unlimited
  std::uint64_t seed = 0;
  std::size_t threads = 0;       // 0 -> hardware concurrency
};

/// Array-backed binary tree. feature[k] < 0 marks a leaf. Rows go left when
/// x[feature] <= threshold.
struct DecisionTree {
  std::vector<std::int32_t> feature;
  std::vector<double> threshold;
  std::vector<std::int32_t> left;
  std::vector<std::int32_t> right;
  std::vector<double> count0;  // weighted class counts at each node
  std::vector<double> count1;
  std::vector<double> gain;    // weighted impurity decrease at internal nodes

  std::size_t node_count() const { return feature.size(); }

  /// Leaf index reached by x; `value(j)` returns feature j of the row.
  std::size_t leaf(const std::function<double(std::size_t)>& value) const;

  /// Majority class of the leaf reached, ties to 0.
  int vote(const std::function<double(std::size_t)>& value) const;
};

struct RfModel {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  RfParams params;
  std::vector<double> importances;  // normalized mean decrease in impurity
  std::vector<std::string> feature_names;
};

/// Throws Error{SingleClass}.
RfModel train_rf(const Matrix& X, std::span<const int> y, const RfParams& params);

/// Fraction of trees voting for the citing class.
double predict_rf(const RfModel& model, const textrep::SparseVector& x);
double predict_rf(const RfModel& model, std::span<const double> x);
std::vector<double> predict_rf(const RfModel& model, const Matrix& X);

/// Majority decision: strictly more than half the trees; a tie is class 0.
inline bool rf_decision(double probability) { return probability > 0.5; }

/// MDI importances recomputed from the stored trees.
std::vector<double> rf_importances(const std::vector<DecisionTree>& trees, std::size_t n_features);

// ---------------------------------------------------------------------------
// Importance report

struct FeatureImportance {
  std::string feature;
  std::string category;
  double importance = 0;
  int sign = 0;  // sign of the ENLR coefficient
};

struct CategoryImportance {
  std::string category;
  double importance = 0;
  std::size_t members = 0;
  int sign = 0;  // only meaningful for single-feature categories
};

struct ImportanceReport {
  std::vector<FeatureImportance> features;      // layout order
  std::vector<CategoryImportance> categories;   // first-appearance order
};

/// Throws Error{FeatureSpaceMismatch} when the models or names disagree on
/// the feature dimension.
ImportanceReport importance_report(const RfModel& rf, const EnlrModel& enlr,
                                   const std::vector<std::string>& feature_names,
                                   const std::vector<std::string>& categories);

/// The `top` most important features of one category, descending.
std::vector<FeatureImportance> top_features(const ImportanceReport& report,
                                            const std::string& category, std::size_t top);

std::string importance_csv(const ImportanceReport& report);
std::string category_csv(const ImportanceReport& report);
nlohmann::json importance_json(const ImportanceReport& report);

}  // namespace citeworth::linear
