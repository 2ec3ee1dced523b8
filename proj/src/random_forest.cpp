#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "citeworth/error.hpp"
#include "citeworth/linear.hpp"
#include "citeworth/rng.hpp"

namespace citeworth::linear {

namespace {

double gini_weighted(double w0, double w1) {
  const double w = w0 + w1;
  if (w <= 0) return 0.0;
  return w - (w0 * w0 + w1 * w1) / w;  // W * impurity
}

struct Entry {
  std::uint32_t feature;
  double value;
  std::uint32_t sample;
};

class TreeBuilder {
 public:
  TreeBuilder(const RowMatrix& X, std::span<const int> y, std::size_t max_features,
              std::size_t max_depth)
      : X_(X), y_(y), max_features_(max_features), max_depth_(max_depth),
        scratch_(static_cast<std::size_t>(X.rows()), 0.0) {}

  DecisionTree build(const std::vector<double>& weight, Rng& rng) {
    tree_ = DecisionTree{};
    w_ = &weight;
    std::vector<std::uint32_t> root;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      if (weight[i] > 0) root.push_back(static_cast<std::uint32_t>(i));
    }
    struct Job {
      std::vector<std::uint32_t> samples;
      std::int32_t node;
      std::size_t depth;
    };
    std::vector<Job> stack;
    stack.push_back({std::move(root), new_node(), 0});
    while (!stack.empty()) {
      Job job = std::move(stack.back());
      stack.pop_back();
      auto [l, r] = split_node(job.node, job.samples, job.depth, rng);
      if (!l.empty()) {
        const std::int32_t ln = new_node();
        const std::int32_t rn = new_node();
        tree_.left[static_cast<std::size_t>(job.node)] = ln;
        tree_.right[static_cast<std::size_t>(job.node)] = rn;
        stack.push_back({std::move(r), rn, job.depth + 1});
        stack.push_back({std::move(l), ln, job.depth + 1});
      }
    }
    return std::move(tree_);
  }

 private:
  const RowMatrix& X_;
  std::span<const int> y_;
  std::size_t max_features_;
  std::size_t max_depth_;
  std::vector<double> scratch_;
  const std::vector<double>* w_ = nullptr;
  DecisionTree tree_;

  std::int32_t new_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.count0.push_back(0.0);
    tree_.count1.push_back(0.0);
    tree_.gain.push_back(0.0);
    return static_cast<std::int32_t>(tree_.feature.size() - 1);
  }

  std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> split_node(
      std::int32_t node, const std::vector<std::uint32_t>& samples, std::size_t depth, Rng& rng) {
    const auto& w = *w_;
    double W0 = 0, W1 = 0;
    for (auto i : samples) (y_[i] ? W1 : W0) += w[i];
    const auto k = static_cast<std::size_t>(node);
    tree_.count0[k] = W0;
    tree_.count1[k] = W1;
    if (W0 == 0 || W1 == 0 || (max_depth_ > 0 && depth >= max_depth_)) return {};

    std::vector<Entry> entries;
    for (auto i : samples) {
      for (RowMatrix::InnerIterator it(X_, i); it; ++it) {
        entries.push_back({static_cast<std::uint32_t>(it.col()), it.value(), i});
      }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.feature != b.feature) return a.feature < b.feature;
      if (a.value != b.value) return a.value < b.value;
      return a.sample < b.sample;
    });

    // Non-constant features, as [begin, end) ranges of `entries`.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t b = 0; b < entries.size();) {
      std::size_t e = b;
      while (e < entries.size() && entries[e].feature == entries[b].feature) ++e;
      const bool has_zero = (e - b) < samples.size();
      const double lo = entries[b].value;
      const double hi = entries[e - 1].value;
      const bool constant = lo == hi && (!has_zero || lo == 0.0);
      if (!constant) groups.emplace_back(b, e);
      b = e;
    }
    if (groups.empty()) return {};

    // A uniform subset of the non-constant features, the same distribution as
    // drawing features at random until enough non-constant ones turn up.
    const std::size_t take = std::min(max_features_, groups.size());
    for (std::size_t t = 0; t < take; ++t) {
      const std::size_t j = t + rng.uniform_index(groups.size() - t);
      std::swap(groups[t], groups[j]);
    }

    double best_gain = -1.0;
    std::uint32_t best_feature = 0;
    double best_threshold = 0.0;
    std::size_t best_group = 0;
    const double parent = gini_weighted(W0, W1);

    struct Bin {
      double value, w0, w1;
    };
    std::vector<Bin> bins;
    for (std::size_t t = 0; t < take; ++t) {
      const auto [b, e] = groups[t];
      bins.clear();
      double s0 = 0, s1 = 0;
      for (std::size_t q = b; q < e; ++q) {
        const auto i = entries[q].sample;
        const double wi = w[i];
        (y_[i] ? s1 : s0) += wi;
        if (bins.empty() || bins.back().value != entries[q].value) {
          bins.push_back({entries[q].value, 0, 0});
        }
        (y_[i] ? bins.back().w1 : bins.back().w0) += wi;
      }
      if (e - b < samples.size()) {
        const double z0 = W0 - s0, z1 = W1 - s1;
        auto pos = std::lower_bound(bins.begin(), bins.end(), 0.0,
                                    [](const Bin& x, double v) { return x.value < v; });
        if (pos != bins.end() && pos->value == 0.0) {
          pos->w0 += z0;
          pos->w1 += z1;
        } else {
          bins.insert(pos, {0.0, z0, z1});
        }
      }
      double l0 = 0, l1 = 0;
      for (std::size_t q = 0; q + 1 < bins.size(); ++q) {
        l0 += bins[q].w0;
        l1 += bins[q].w1;
        const double gain = parent - gini_weighted(l0, l1) - gini_weighted(W0 - l0, W1 - l1);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = entries[b].feature;
          const double a = bins[q].value, c = bins[q + 1].value;
          double th = a + (c - a) / 2.0;
          if (!(th < c)) th = a;
          best_threshold = th;
          best_group = t;
        }
      }
    }
    if (best_gain < 0) return {};

    tree_.feature[k] = static_cast<std::int32_t>(best_feature);
    tree_.threshold[k] = best_threshold;
    tree_.gain[k] = std::max(0.0, best_gain);

    const auto [b, e] = groups[best_group];
    for (std::size_t q = b; q < e; ++q) scratch_[entries[q].sample] = entries[q].value;
    std::vector<std::uint32_t> left, right;
    for (auto i : samples) (scratch_[i] <= best_threshold ? left : right).push_back(i);
    for (std::size_t q = b; q < e; ++q) scratch_[entries[q].sample] = 0.0;
    return {std::move(left), std::move(right)};
  }
};

double sparse_value(const textrep::SparseVector& x, std::size_t j) {
  auto it = std::lower_bound(x.indices.begin(), x.indices.end(), static_cast<std::uint32_t>(j));
  if (it == x.indices.end() || *it != j) return 0.0;
  return x.values[static_cast<std::size_t>(it - x.indices.begin())];
}

}  // namespace

std::size_t DecisionTree::leaf(const std::function<double(std::size_t)>& value) const {
  std::size_t k = 0;
  while (feature[k] >= 0) {
    k = static_cast<std::size_t>(value(static_cast<std::size_t>(feature[k])) <= threshold[k] ? left[k]
                                                                                           : right[k]);
  }
  return k;
}

int DecisionTree::vote(const std::function<double(std::size_t)>& value) const {
  const std::size_t k = leaf(value);
  return count1[k] > count0[k] ? 1 : 0;
}

std::vector<double> rf_importances(const std::vector<DecisionTree>& trees, std::size_t n_features) {
  std::vector<double> imp(n_features, 0.0);
  for (const auto& t : trees) {
    std::vector<double> local(n_features, 0.0);
    double total = 0;
    for (std::size_t k = 0; k < t.node_count(); ++k) {
      if (t.feature[k] >= 0) {
        local[static_cast<std::size_t>(t.feature[k])] += t.gain[k];
        total += t.gain[k];
      }
    }
    if (total > 0) {
      for (std::size_t j = 0; j < n_features; ++j) imp[j] += local[j] / total;
    }
  }
  double sum = 0;
  for (double v : imp) sum += v;
  if (sum > 0) {
    for (double& v : imp) v /= sum;
  } else if (n_features > 0) {
    std::fill(imp.begin(), imp.end(), 1.0 / static_cast<double>(n_features));
  }
  return imp;
}

RfModel train_rf(const Matrix& X, std::span<const int> y, const RfParams& params) {
  check_training_data(X, y);
  if (params.trees == 0) throw Error(ErrorCode::InvalidArgument, "forest needs at least one tree");
  const auto m = static_cast<std::size_t>(X.cols());
  const auto n = static_cast<std::size_t>(X.rows());
  std::size_t p = params.max_features;
  if (p == 0) p = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m))));
  p = std::clamp<std::size_t>(p, 1, std::max<std::size_t>(m, 1));

  RowMatrix R = X;
  R.makeCompressed();

  RfModel model;
  model.n_features = m;
  model.params = params;
  model.params.max_features = p;
  model.trees.resize(params.trees);

  std::size_t threads = params.threads ? params.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, params.trees);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    TreeBuilder builder(R, y, p, params.max_depth);
    std::vector<double> weight(n);
    for (std::size_t t; (t = next.fetch_add(1)) < params.trees;) {
      try {
        Rng rng(derive_seed(params.seed, t));
        if (params.bootstrap) {
          std::fill(weight.begin(), weight.end(), 0.0);
          for (std::size_t d = 0; d < n; ++d) weight[rng.uniform_index(n)] += 1.0;
        } else {
          std::fill(weight.begin(), weight.end(), 1.0);
        }
        model.trees[t] = builder.build(weight, rng);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  model.importances = rf_importances(model.trees, m);
  return model;
}

double predict_rf(const RfModel& model, const textrep::SparseVector& x) {
  if (x.dimension != model.n_features) {
    throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(x.dimension) +
                                                  " features, forest " +
                                                  std::to_string(model.n_features));
  }
  if (model.trees.empty()) return 0.0;
  std::size_t votes = 0;
  auto value = [&](std::size_t j) { return sparse_value(x, j); };
  for (const auto& t : model.trees) votes += static_cast<std::size_t>(t.vote(value));
  return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

double predict_rf(const RfModel& model, std::span<const double> x) {
  if (x.size() != model.n_features) {
    throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(x.size()) +
                                                  " features, forest " +
                                                  std::to_string(model.n_features));
  }
  if (model.trees.empty()) return 0.0;
  std::size_t votes = 0;
  auto value = [&](std::size_t j) { return x[j]; };
  for (const auto& t : model.trees) votes += static_cast<std::size_t>(t.vote(value));
  return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

std::vector<double> predict_rf(const RfModel& model, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != model.n_features) {
    throw Error(ErrorCode::DimensionMismatch, "design matrix width differs from the forest");
  }
  RowMatrix R = X;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(R.rows()));
  textrep::SparseVector row;
  row.dimension = model.n_features;
  for (Eigen::Index i = 0; i < R.rows(); ++i) {
    row.indices.clear();
    row.values.clear();
    for (RowMatrix::InnerIterator it(R, i); it; ++it) {
      row.indices.push_back(static_cast<std::uint32_t>(it.col()));
      row.values.push_back(it.value());
    }
    out.push_back(predict_rf(model, row));
  }
  return out;
}

}  // namespace citeworth::linear
