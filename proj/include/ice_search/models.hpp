#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "feature_set.hpp"
#include "random.hpp"
#include "tabular.hpp"

namespace ice_search {

enum class ModelKind { logistic_regression, cart_tree, random_forest, gradient_boosted_trees, linear_svm };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::logistic_regression: return "logistic_regression";
    case ModelKind::cart_tree: return "cart_tree";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::gradient_boosted_trees: return "gradient_boosted_trees";
    case ModelKind::linear_svm: return "linear_svm";
  }
  return "unknown";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  for (auto k : {ModelKind::logistic_regression, ModelKind::cart_tree, ModelKind::random_forest,
                 ModelKind::gradient_boosted_trees, ModelKind::linear_svm})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown model kind '" + s + "'");
}

// Downstream classifier and its hyperparameters. Fields that a kind does not
// use are ignored. max_depth == 0 means unlimited.
struct ModelSpec {
  ModelKind kind = ModelKind::gradient_boosted_trees;
  double learning_rate = 0.1;  // gradient step (logistic, svm) or shrinkage (boosting)
  std::size_t epochs = 100;    // logistic, svm
  double regularization = 1e-4;  // L2 (logistic), lambda (svm), leaf L2 (boosting)
  std::size_t max_depth = 3;
  std::size_t n_trees = 50;
  std::size_t rounds = 50;
  std::uint64_t seed = 0;

  static ModelSpec defaults(ModelKind kind) {
    ModelSpec s;
    s.kind = kind;
    switch (kind) {
      case ModelKind::logistic_regression:
        s.learning_rate = 0.5;
        s.epochs = 100;
        s.regularization = 1e-4;
        break;
      case ModelKind::cart_tree:
        s.max_depth = 0;
        break;
      case ModelKind::random_forest:
        s.max_depth = 0;
        s.n_trees = 50;
        break;
      case ModelKind::gradient_boosted_trees:
        s.learning_rate = 0.1;
        s.rounds = 50;
        s.max_depth = 3;
        s.regularization = 1.0;
        break;
      case ModelKind::linear_svm:
        s.learning_rate = 0.1;
        s.epochs = 200;
        s.regularization = 1e-4;
        break;
    }
    return s;
  }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
    };
    switch (kind) {
      case ModelKind::logistic_regression:
        positive(learning_rate, "learning_rate");
        positive(static_cast<double>(epochs), "epochs");
        if (regularization < 0.0) throw ConfigError("regularization must be non-negative");
        break;
      case ModelKind::cart_tree: break;
      case ModelKind::random_forest: positive(static_cast<double>(n_trees), "n_trees"); break;
      case ModelKind::gradient_boosted_trees:
        positive(learning_rate, "learning_rate");
        positive(static_cast<double>(rounds), "rounds");
        positive(static_cast<double>(max_depth), "max_depth");
        if (regularization < 0.0) throw ConfigError("regularization must be non-negative");
        break;
      case ModelKind::linear_svm:
        positive(learning_rate, "learning_rate");
        positive(static_cast<double>(epochs), "epochs");
        positive(regularization, "regularization");
        break;
    }
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return std::span<const double>(data).subspan(r * cols, cols); }
};

// Rows of the dataset restricted to the subset's columns, in subset order.
inline Matrix gather(const Dataset& ds, std::span<const std::size_t> rows, const FeatureSet& subset) {
  Matrix m(rows.size(), subset.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t j = 0;
    for (std::size_t f : subset) m(i, j++) = ds.at(rows[i], f);
  }
  return m;
}

inline Matrix gather(const Dataset& ds, const FeatureSet& subset) {
  std::vector<std::size_t> all(ds.n_rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gather(ds, all, subset);
}

inline std::vector<int> gather_labels(const Dataset& ds, std::span<const std::size_t> rows) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (std::size_t r : rows) y.push_back(ds.y[r]);
  return y;
}

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Standardizer {
  std::vector<double> mean, inv_sd;

  static Standardizer fit(const Matrix& X) {
    Standardizer s{std::vector<double>(X.cols, 0.0), std::vector<double>(X.cols, 0.0)};
    const double n = static_cast<double>(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i)
      for (std::size_t j = 0; j < X.cols; ++j) s.mean[j] += X(i, j);
    for (auto& m : s.mean) m /= n;
    std::vector<double> var(X.cols, 0.0);
    for (std::size_t i = 0; i < X.rows; ++i)
      for (std::size_t j = 0; j < X.cols; ++j) var[j] += (X(i, j) - s.mean[j]) * (X(i, j) - s.mean[j]);
    // Constant columns map to 0.
    for (std::size_t j = 0; j < X.cols; ++j) {
      const double sd = std::sqrt(var[j] / n);
      s.inv_sd[j] = sd > 0.0 ? 1.0 / sd : 0.0;
    }
    return s;
  }

  Matrix apply(const Matrix& X) const {
    Matrix Z(X.rows, X.cols);
    for (std::size_t i = 0; i < X.rows; ++i)
      for (std::size_t j = 0; j < X.cols; ++j) Z(i, j) = (X(i, j) - mean[j]) * inv_sd[j];
    return Z;
  }
};

inline int majority_label(std::span<const int> y) {
  const auto ones = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  return ones * 2 > y.size() ? 1 : 0;
}

// Binary decision tree stored as a flat node array. Internal nodes send
// x[feature] <= threshold to the left child.
struct Tree {
  struct Node {
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    double value = 0.0;
    bool leaf = true;
  };
  std::vector<Node> nodes;

  double evaluate(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].leaf) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
  }
};

struct SplitChoice {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = -std::numeric_limits<double>::infinity();
  bool found = false;
};

// Greedy best split over candidate features. Candidates are visited in
// ascending index order and thresholds ascending; only a strictly larger gain
// replaces the incumbent, so ties resolve to lowest feature, then lowest
// threshold. `score(left_stats, right_stats)` returns the split gain.
template <typename Stats, typename Accumulate, typename Score>
SplitChoice best_split(const Matrix& X, std::span<const std::size_t> idx, std::span<const std::size_t> features,
                       Accumulate accumulate, Score score, std::vector<std::size_t>& scratch) {
  SplitChoice best;
  Stats total{};
  for (std::size_t i : idx) accumulate(total, i);
  for (std::size_t f : features) {
    scratch.assign(idx.begin(), idx.end());
    std::stable_sort(scratch.begin(), scratch.end(), [&](std::size_t a, std::size_t b) { return X(a, f) < X(b, f); });
    Stats left{};
    for (std::size_t p = 0; p + 1 < scratch.size(); ++p) {
      accumulate(left, scratch[p]);
      const double v = X(scratch[p], f), next = X(scratch[p + 1], f);
      if (!(v < next)) continue;
      const double gain = score(left, total - left, total);
      if (gain > best.gain) {
        best.gain = gain;
        best.feature = f;
        best.threshold = v + (next - v) / 2.0;
        best.found = true;
      }
    }
  }
  return best;
}

struct ClassStats {
  double w = 0.0, w1 = 0.0;
  ClassStats operator-(const ClassStats& o) const { return {w - o.w, w1 - o.w1}; }
  double gini() const {
    if (w <= 0.0) return 0.0;
    const double p = w1 / w;
    return 2.0 * p * (1.0 - p);
  }
};

// Gini-impurity CART. `sample` holds row indices with multiplicity (bootstrap);
// importance[f] accumulates weighted impurity decrease normalized by the
// root weight. max_features == 0 considers every feature at each split.
inline Tree grow_classification_tree(const Matrix& X, std::span<const int> y, std::vector<std::size_t> sample,
                                     std::size_t max_depth, std::size_t max_features, Rng* rng,
                                     std::vector<double>* importance) {
  Tree tree;
  std::vector<std::size_t> scratch, features(X.cols);
  std::iota(features.begin(), features.end(), std::size_t{0});
  const double root_weight = static_cast<double>(sample.size());

  auto accumulate = [&](ClassStats& s, std::size_t i) {
    s.w += 1.0;
    s.w1 += y[i];
  };
  auto score = [](const ClassStats& l, const ClassStats& r, const ClassStats& t) {
    return t.w * t.gini() - l.w * l.gini() - r.w * r.gini();
  };

  struct Pending {
    std::size_t node;
    std::vector<std::size_t> idx;
    std::size_t depth;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, std::move(sample), 0});
  while (!stack.empty()) {
    Pending job = std::move(stack.back());
    stack.pop_back();
    ClassStats total;
    for (std::size_t i : job.idx) accumulate(total, i);
    tree.nodes[job.node].value = total.w > 0 ? total.w1 / total.w : 0.0;
    const bool pure = total.w1 == 0.0 || total.w1 == total.w;
    if (pure || job.idx.size() < 2 || (max_depth != 0 && job.depth >= max_depth)) continue;

    std::span<const std::size_t> candidates = features;
    std::vector<std::size_t> drawn;
    if (max_features != 0 && max_features < X.cols) {
      drawn = features;
      for (std::size_t t = 0; t < max_features; ++t) std::swap(drawn[t], drawn[t + rng->index(drawn.size() - t)]);
      drawn.resize(max_features);
      std::sort(drawn.begin(), drawn.end());
      candidates = drawn;
    }
    SplitChoice split = best_split<ClassStats>(X, job.idx, candidates, accumulate, score, scratch);
    if (!split.found) continue;

    std::vector<std::size_t> left, right;
    for (std::size_t i : job.idx) (X(i, split.feature) <= split.threshold ? left : right).push_back(i);
    if (importance) (*importance)[split.feature] += split.gain / root_weight;
    auto& node = tree.nodes[job.node];
    node.leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = tree.nodes.size();
    node.right = tree.nodes.size() + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    const std::size_t l = tree.nodes[job.node].left, r = tree.nodes[job.node].right;
    stack.push_back({r, std::move(right), job.depth + 1});
    stack.push_back({l, std::move(left), job.depth + 1});
  }
  return tree;
}

struct GradStats {
  double g = 0.0, h = 0.0;
  GradStats operator-(const GradStats& o) const { return {g - o.g, h - o.h}; }
};

// Second-order regression tree on logistic-loss gradients. Leaves hold the
// Newton step -G / (H + lambda).
inline Tree grow_boosting_tree(const Matrix& X, std::span<const double> grad, std::span<const double> hess,
                               std::size_t max_depth, double lambda) {
  Tree tree;
  std::vector<std::size_t> scratch, features(X.cols), all(X.rows);
  std::iota(features.begin(), features.end(), std::size_t{0});
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto accumulate = [&](GradStats& s, std::size_t i) {
    s.g += grad[i];
    s.h += hess[i];
  };
  auto objective = [lambda](const GradStats& s) { return s.g * s.g / (s.h + lambda); };
  auto score = [&](const GradStats& l, const GradStats& r, const GradStats& t) {
    return objective(l) + objective(r) - objective(t);
  };

  struct Pending {
    std::size_t node;
    std::vector<std::size_t> idx;
    std::size_t depth;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, std::move(all), 0});
  while (!stack.empty()) {
    Pending job = std::move(stack.back());
    stack.pop_back();
    GradStats total;
    for (std::size_t i : job.idx) accumulate(total, i);
    tree.nodes[job.node].value = -total.g / (total.h + lambda);
    if (job.idx.size() < 2 || job.depth >= max_depth) continue;
    SplitChoice split = best_split<GradStats>(X, job.idx, features, accumulate, score, scratch);
    if (!split.found || !(split.gain > 1e-12)) continue;
    std::vector<std::size_t> left, right;
    for (std::size_t i : job.idx) (X(i, split.feature) <= split.threshold ? left : right).push_back(i);
    auto& node = tree.nodes[job.node];
    node.leaf = false;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = tree.nodes.size();
    node.right = tree.nodes.size() + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    const std::size_t l = tree.nodes[job.node].left, r = tree.nodes[job.node].right;
    stack.push_back({r, std::move(right), job.depth + 1});
    stack.push_back({l, std::move(left), job.depth + 1});
  }
  return tree;
}

struct MajorityModel {
  int label = 0;
};

struct LinearModel {
  Standardizer scaler;
  std::vector<double> weights;
  double bias = 0.0;

  double margin(std::span<const double> x) const {
    double z = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * (x[j] - scaler.mean[j]) * scaler.inv_sd[j];
    return z;
  }
};

struct TreeModel {
  Tree tree;
  std::vector<double> importance;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<double> importance;
};

struct BoostedModel {
  double base_score = 0.0;
  double shrinkage = 0.1;
  std::vector<Tree> trees;
};

}  // namespace detail

// A trained classifier. Labels are predicted in {0, 1}; exact ties in the
// decision value go to the training majority class.
class FittedModel {
 public:
  using Body = std::variant<detail::MajorityModel, detail::LinearModel, detail::TreeModel, detail::ForestModel,
                            detail::BoostedModel>;

  FittedModel(ModelKind kind, std::size_t n_cols, int majority, Body body)
      : kind_(kind), n_cols_(n_cols), majority_(majority), body_(std::move(body)) {}

  ModelKind kind() const noexcept { return kind_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  bool is_majority_vote() const noexcept { return std::holds_alternative<detail::MajorityModel>(body_); }

  int predict_row(std::span<const double> x) const {
    return std::visit(
        [&](const auto& m) -> int {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, detail::MajorityModel>) {
            return m.label;
          } else if constexpr (std::is_same_v<T, detail::LinearModel>) {
            return decide(m.margin(x), 0.0);
          } else if constexpr (std::is_same_v<T, detail::TreeModel>) {
            return decide(m.tree.evaluate(x), 0.5);
          } else if constexpr (std::is_same_v<T, detail::ForestModel>) {
            double p = 0.0;
            for (const auto& t : m.trees) p += t.evaluate(x);
            return decide(p / static_cast<double>(m.trees.size()), 0.5);
          } else {
            double z = m.base_score;
            for (const auto& t : m.trees) z += m.shrinkage * t.evaluate(x);
            return decide(z, 0.0);
          }
        },
        body_);
  }

  std::vector<int> predict(const Matrix& X) const {
    if (X.rows > 0 && X.cols != n_cols_)
      throw ModelError("predict: expected " + std::to_string(n_cols_) + " columns, got " + std::to_string(X.cols));
    std::vector<int> out;
    out.reserve(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) out.push_back(predict_row(X.row(i)));
    return out;
  }

  // Per-column importance: impurity decrease for tree kinds, absolute
  // standardized weight for linear kinds, zeros otherwise.
  std::vector<double> importances() const {
    return std::visit(
        [&](const auto& m) -> std::vector<double> {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, detail::LinearModel>) {
            std::vector<double> w(m.weights.size());
            std::transform(m.weights.begin(), m.weights.end(), w.begin(), [](double v) { return std::abs(v); });
            return w;
          } else if constexpr (std::is_same_v<T, detail::TreeModel> || std::is_same_v<T, detail::ForestModel>) {
            return m.importance;
          } else {
            return std::vector<double>(n_cols_, 0.0);
          }
        },
        body_);
  }

 private:
  int decide(double value, double cut) const {
    if (value > cut) return 1;
    if (value < cut) return 0;
    return majority_;
  }

  ModelKind kind_;
  std::size_t n_cols_;
  int majority_;
  Body body_;
};

namespace detail {

inline LinearModel fit_logistic(const Matrix& X, std::span<const int> y, const ModelSpec& spec) {
  LinearModel m{Standardizer::fit(X), std::vector<double>(X.cols, 0.0), 0.0};
  const Matrix Z = m.scaler.apply(X);
  const double n = static_cast<double>(X.rows);
  std::vector<double> grad(X.cols);
  for (std::size_t e = 0; e < spec.epochs; ++e) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < Z.rows; ++i) {
      auto z = Z.row(i);
      double s = m.bias;
      for (std::size_t j = 0; j < Z.cols; ++j) s += m.weights[j] * z[j];
      const double r = sigmoid(s) - y[i];
      for (std::size_t j = 0; j < Z.cols; ++j) grad[j] += r * z[j];
      grad_b += r;
    }
    for (std::size_t j = 0; j < Z.cols; ++j)
      m.weights[j] -= spec.learning_rate * (grad[j] / n + spec.regularization * m.weights[j]);
    m.bias -= spec.learning_rate * grad_b / n;
  }
  return m;
}

// Hinge-loss subgradient descent with step lr / (1 + lr * lambda * t) over
// seeded row permutations; the bias is not regularized.
inline LinearModel fit_linear_svm(const Matrix& X, std::span<const int> y, const ModelSpec& spec) {
  LinearModel m{Standardizer::fit(X), std::vector<double>(X.cols, 0.0), 0.0};
  const Matrix Z = m.scaler.apply(X);
  std::vector<std::size_t> order(Z.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, {0x5f3}));
  const double lambda = spec.regularization, lr = spec.learning_rate;
  std::size_t t = 0;
  for (std::size_t e = 0; e < spec.epochs; ++e) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const double eta = lr / (1.0 + lr * lambda * static_cast<double>(t++));
      const double label = y[i] == 1 ? 1.0 : -1.0;
      auto z = Z.row(i);
      double s = m.bias;
      for (std::size_t j = 0; j < Z.cols; ++j) s += m.weights[j] * z[j];
      const bool violated = label * s < 1.0;
      for (std::size_t j = 0; j < Z.cols; ++j) {
        m.weights[j] *= 1.0 - eta * lambda;
        if (violated) m.weights[j] += eta * label * z[j];
      }
      if (violated) m.bias += eta * label;
    }
  }
  return m;
}

inline BoostedModel fit_boosted(const Matrix& X, std::span<const int> y, const ModelSpec& spec) {
  BoostedModel m;
  m.shrinkage = spec.learning_rate;
  const double n = static_cast<double>(X.rows);
  const double p1 = static_cast<double>(std::count(y.begin(), y.end(), 1)) / n;
  m.base_score = std::log(p1 / (1.0 - p1));
  std::vector<double> raw(X.rows, m.base_score), grad(X.rows), hess(X.rows);
  for (std::size_t round = 0; round < spec.rounds; ++round) {
    for (std::size_t i = 0; i < X.rows; ++i) {
      const double p = sigmoid(raw[i]);
      grad[i] = p - y[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    Tree t = grow_boosting_tree(X, grad, hess, spec.max_depth, spec.regularization);
    for (std::size_t i = 0; i < X.rows; ++i) raw[i] += m.shrinkage * t.evaluate(X.row(i));
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace detail

// Trains a classifier on X (rows = samples). Deterministic given (spec, X, y).
// When every column is constant the result is a majority-vote model.
inline FittedModel fit(const ModelSpec& spec, const Matrix& X, std::span<const int> y) {
  if (X.rows == 0) throw ModelError("fit: no training rows");
  if (X.cols == 0) throw ModelError("fit: empty feature restriction");
  if (y.size() != X.rows) throw ModelError("fit: label count does not match row count");
  const auto ones = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (ones == 0 || ones == y.size()) throw ModelError("fit: training labels contain a single class");
  spec.validate();
  const int majority = detail::majority_label(y);

  bool informative = false;
  for (std::size_t j = 0; j < X.cols && !informative; ++j)
    for (std::size_t i = 1; i < X.rows; ++i)
      if (X(i, j) != X(0, j)) {
        informative = true;
        break;
      }
  if (!informative) return FittedModel(spec.kind, X.cols, majority, detail::MajorityModel{majority});

  std::vector<std::size_t> all(X.rows);
  std::iota(all.begin(), all.end(), std::size_t{0});
  switch (spec.kind) {
    case ModelKind::logistic_regression:
      return FittedModel(spec.kind, X.cols, majority, detail::fit_logistic(X, y, spec));
    case ModelKind::linear_svm:
      return FittedModel(spec.kind, X.cols, majority, detail::fit_linear_svm(X, y, spec));
    case ModelKind::cart_tree: {
      detail::TreeModel m;
      m.importance.assign(X.cols, 0.0);
      m.tree = detail::grow_classification_tree(X, y, all, spec.max_depth, 0, nullptr, &m.importance);
      return FittedModel(spec.kind, X.cols, majority, std::move(m));
    }
    case ModelKind::random_forest: {
      detail::ForestModel m;
      m.importance.assign(X.cols, 0.0);
      const auto max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(X.cols))));
      std::vector<double> imp(X.cols);
      for (std::size_t t = 0; t < spec.n_trees; ++t) {
        Rng rng(derive_seed(spec.seed, {0xf0e57, t}));
        std::vector<std::size_t> sample(X.rows);
        for (auto& s : sample) s = rng.index(X.rows);
        std::fill(imp.begin(), imp.end(), 0.0);
        m.trees.push_back(
            detail::grow_classification_tree(X, y, std::move(sample), spec.max_depth, max_features, &rng, &imp));
        for (std::size_t j = 0; j < X.cols; ++j) m.importance[j] += imp[j];
      }
      for (auto& v : m.importance) v /= static_cast<double>(spec.n_trees);
      return FittedModel(spec.kind, X.cols, majority, std::move(m));
    }
    case ModelKind::gradient_boosted_trees:
      return FittedModel(spec.kind, X.cols, majority, detail::fit_boosted(X, y, spec));
  }
  throw ModelError("fit: unknown model kind");
}

inline std::vector<int> predict(const FittedModel& model, const Matrix& X) { return model.predict(X); }

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (truth.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

// Mean train/validation accuracy over the folds of an N-fold CV.
struct Evaluation {
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::size_t n_folds = 0;

  friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

// Uncached N-fold CV of `spec` restricted to `subset`. The model for fold i
// is seeded from (spec.seed, i).
inline Evaluation cross_validate(const Dataset& dataset, const FeatureSet& subset, const ModelSpec& spec,
                                 const FoldAssignment& folds) {
  if (subset.empty()) throw ModelError("cross_validate: empty feature subset");
  if (!subset.within(dataset.n_features())) throw ModelError("cross_validate: subset outside the feature universe");
  if (folds.fold_of_row.size() != dataset.n_rows()) throw ModelError("cross_validate: fold assignment size mismatch");
  double train_sum = 0.0, val_sum = 0.0;
  for (std::size_t f = 0; f < folds.n_folds; ++f) {
    const auto tr = folds.training_rows(f), va = folds.validation_rows(f);
    const Matrix Xtr = gather(dataset, tr, subset), Xva = gather(dataset, va, subset);
    const auto ytr = gather_labels(dataset, tr), yva = gather_labels(dataset, va);
    ModelSpec fold_spec = spec;
    fold_spec.seed = derive_seed(spec.seed, {0xc5, f});
    FittedModel model = [&] {
      try {
        return fit(fold_spec, Xtr, ytr);
      } catch (const ModelError& e) {
        throw ModelError("fold " + std::to_string(f) + ": " + e.what());
      }
    }();
    train_sum += accuracy(model.predict(Xtr), ytr);
    val_sum += accuracy(model.predict(Xva), yva);
  }
  const double n = static_cast<double>(folds.n_folds);
  return {train_sum / n, val_sum / n, folds.n_folds};
}

// Memoized cross-validation for one (dataset, spec, folds) triple. Safe for
// concurrent use; racing inserts of the same subset store identical values.
class Evaluator {
 public:
  Evaluator(const Dataset& dataset, ModelSpec spec, FoldAssignment folds)
      : dataset_(dataset), spec_(std::move(spec)), folds_(std::move(folds)) {
    spec_.validate();
  }

  Evaluator(const Evaluator&) = delete;
  Evaluator& operator=(const Evaluator&) = delete;

  const Dataset& dataset() const noexcept { return dataset_; }
  const ModelSpec& spec() const noexcept { return spec_; }
  const FoldAssignment& folds() const noexcept { return folds_; }

  Evaluation evaluate(const FeatureSet& subset) const {
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(subset); it != cache_.end()) return it->second;
    }
    Evaluation e = cross_validate(dataset_, subset, spec_, folds_);
    std::unique_lock lock(mutex_);
    return cache_.emplace(subset, e).first->second;
  }

  Evaluation recompute(const FeatureSet& subset) const { return cross_validate(dataset_, subset, spec_, folds_); }

  std::size_t cache_size() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
  }

 private:
  const Dataset& dataset_;
  ModelSpec spec_;
  FoldAssignment folds_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<FeatureSet, Evaluation, FeatureSetHash> cache_;
};

// Trains on every row of `train` and scores the held-out `test` rows.
inline double holdout_accuracy(const Dataset& train, const Dataset& test, const FeatureSet& subset,
                               const ModelSpec& spec) {
  const FittedModel model = fit(spec, gather(train, subset), train.y);
  return accuracy(model.predict(gather(test, subset)), test.y);
}

}  // namespace ice_search
