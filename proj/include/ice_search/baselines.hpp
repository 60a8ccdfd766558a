#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "feature_set.hpp"
#include "models.hpp"
#include "tabular.hpp"

namespace ice_search {

enum class ImportanceMethod { decision_tree, random_forest, logistic, fisher_score };

inline constexpr std::array<ImportanceMethod, 4> kClassicalMethods{
    ImportanceMethod::decision_tree, ImportanceMethod::random_forest, ImportanceMethod::logistic,
    ImportanceMethod::fisher_score};

inline std::string to_string(ImportanceMethod m) {
  switch (m) {
    case ImportanceMethod::decision_tree: return "decision_tree";
    case ImportanceMethod::random_forest: return "random_forest";
    case ImportanceMethod::logistic: return "logistic";
    case ImportanceMethod::fisher_score: return "fisher_score";
  }
  return "unknown";
}

struct ImportanceVector {
  ImportanceMethod method;
  std::vector<double> scores;
};

// Fisher score per column, using population (biased) per-class variances.
// A column whose within-class spread is zero scores 0.
inline std::vector<double> fisher_scores(const Dataset& ds) {
  const std::size_t n = ds.n_rows(), d = ds.n_features();
  const auto counts = ds.class_counts();
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    std::array<double, 2> sum{0.0, 0.0}, sq{0.0, 0.0};
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(ds.y[i]);
      sum[c] += ds.at(i, j);
      total += ds.at(i, j);
    }
    const double mu = total / static_cast<double>(n);
    std::array<double, 2> mean{};
    for (std::size_t c = 0; c < 2; ++c) mean[c] = sum[c] / static_cast<double>(counts[c]);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(ds.y[i]);
      const double dev = ds.at(i, j) - mean[c];
      sq[c] += dev * dev;
    }
    double between = 0.0, within = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      between += static_cast<double>(counts[c]) * (mean[c] - mu) * (mean[c] - mu);
      within += sq[c];  // n_c * (sq_c / n_c)
    }
    out[j] = within > 0.0 ? between / within : 0.0;
  }
  return out;
}

// Importance of every feature under one classical selector. Model-based
// methods use `spec` when given, otherwise the defaults for their kind.
inline ImportanceVector feature_importances(const Dataset& dataset, ImportanceMethod method, std::uint64_t seed,
                                            std::optional<ModelSpec> spec = std::nullopt) {
  const auto counts = dataset.class_counts();
  if (counts[0] == 0 || counts[1] == 0) throw DataError("feature_importances requires both classes");
  if (method == ImportanceMethod::fisher_score) return {method, fisher_scores(dataset)};

  const ModelKind kind = method == ImportanceMethod::decision_tree   ? ModelKind::cart_tree
                         : method == ImportanceMethod::random_forest ? ModelKind::random_forest
                                                                     : ModelKind::logistic_regression;
  ModelSpec s = spec.value_or(ModelSpec::defaults(kind));
  s.kind = kind;
  s.seed = seed;
  std::vector<std::size_t> all(dataset.n_features());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const FittedModel model = fit(s, gather(dataset, FeatureSet(all)), dataset.y);
  return {method, model.importances()};
}

struct SelectionPolicy {
  enum class Kind { above_mean, top_k } kind = Kind::above_mean;
  std::size_t k = 1;

  static SelectionPolicy above_mean() { return {}; }
  static SelectionPolicy top_k(std::size_t k) { return {Kind::top_k, k}; }
};

// Turns importances into a non-empty subset. above_mean keeps scores strictly
// above the mean and falls back to the single best feature; top_k keeps the k
// largest with ties to the lowest index.
inline FeatureSet select_by_importance(const ImportanceVector& importances, SelectionPolicy policy) {
  const auto& s = importances.scores;
  const std::size_t n = s.size();
  if (n == 0) throw DataError("select_by_importance: no scores");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

  if (policy.kind == SelectionPolicy::Kind::top_k) {
    if (policy.k < 1 || policy.k > n)
      throw ConfigError("top_k requires 1 <= k <= " + std::to_string(n) + ", got " + std::to_string(policy.k));
    return FeatureSet(std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(policy.k)));
  }
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < n; ++j)
    if (s[j] > mean) keep.push_back(j);
  if (keep.empty()) keep.push_back(order.front());
  return FeatureSet(std::move(keep));
}

struct ClassicalSelection {
  ImportanceMethod method;
  ImportanceVector importances;
  FeatureSet subset;
};

// Runs all four classical selectors in a fixed order.
inline std::vector<ClassicalSelection> classical_selections(const Dataset& dataset, std::uint64_t seed,
                                                            SelectionPolicy policy = SelectionPolicy::above_mean()) {
  std::vector<ClassicalSelection> out;
  for (ImportanceMethod m : kClassicalMethods) {
    auto imp = feature_importances(dataset, m, derive_seed(seed, {0xba5e, static_cast<std::uint64_t>(m)}));
    FeatureSet subset = select_by_importance(imp, policy);
    out.push_back({m, std::move(imp), std::move(subset)});
  }
  return out;
}

}  // namespace ice_search
