#pragma once

// Synthetic datasets and small helpers shared by the test binaries.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ice_search/random.hpp"
#include "ice_search/tabular.hpp"

namespace ice_search::testing {

inline Dataset make_dataset(std::vector<std::vector<double>> rows, std::vector<int> y,
                            std::vector<std::string> names = {}) {
  Dataset ds;
  const std::size_t d = rows.empty() ? names.size() : rows.front().size();
  if (names.empty())
    for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  ds.feature_names = names;
  ds.columns.assign(d, ColumnKind::numeric);
  ds.category_labels.assign(d, {});
  for (const auto& r : rows) ds.X.insert(ds.X.end(), r.begin(), r.end());
  ds.y = std::move(y);
  ds.validate();
  return ds;
}

// Binary features; label = majority of features {0,1,2}, flipped with
// probability `flip`.
inline Dataset planted_signal(std::size_t rows, std::size_t features, double flip, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> X;
  std::vector<int> y;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> r(features);
    for (auto& v : r) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    int label = (r[0] + r[1] + r[2]) >= 2.0 ? 1 : 0;
    if (rng.uniform01() < flip) label = 1 - label;
    X.push_back(std::move(r));
    y.push_back(label);
  }
  return make_dataset(std::move(X), std::move(y));
}

// Gaussian-ish noise features and coin-flip labels.
inline Dataset coin_flips(std::size_t rows, std::size_t features, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> X;
  std::vector<int> y;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> r(features);
    for (auto& v : r) v = rng.uniform01() + rng.uniform01() + rng.uniform01() - 1.5;
    X.push_back(std::move(r));
    y.push_back(rng.uniform01() < 0.5 ? 1 : 0);
  }
  return make_dataset(std::move(X), std::move(y));
}

// Continuous features with a linear signal on the first `signal` columns.
inline Dataset linear_signal(std::size_t rows, std::size_t features, std::size_t signal, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> X;
  std::vector<int> y;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> r(features);
    double s = 0.0;
    for (std::size_t j = 0; j < features; ++j) {
      r[j] = rng.uniform01() * 2.0 - 1.0;
      if (j < signal) s += r[j];
    }
    s += 0.3 * (rng.uniform01() - 0.5);
    X.push_back(std::move(r));
    y.push_back(s > 0.0 ? 1 : 0);
  }
  return make_dataset(std::move(X), std::move(y));
}

}  // namespace ice_search::testing
