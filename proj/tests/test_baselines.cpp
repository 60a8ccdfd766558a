#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ice_search/baselines.hpp"
#include "support.hpp"

using namespace ice_search;
using ice_search::testing::linear_signal;
using ice_search::testing::make_dataset;

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Brute-force weighted Gini decrease of the best single split on one column.
double best_root_gini_decrease(const Dataset& ds, std::size_t col) {
  auto gini = [](double n, double n1) { return n == 0 ? 0.0 : 2.0 * (n1 / n) * (1.0 - n1 / n); };
  const double n = static_cast<double>(ds.n_rows());
  double n1 = 0;
  for (int v : ds.y) n1 += v;
  double best = 0.0;
  for (std::size_t t = 0; t < ds.n_rows(); ++t) {
    const double threshold = ds.at(t, col);
    double ln = 0, ln1 = 0;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
      if (ds.at(i, col) <= threshold) {
        ln += 1;
        ln1 += ds.y[i];
      }
    const double dec = n * gini(n, n1) - ln * gini(ln, ln1) - (n - ln) * gini(n - ln, n1 - ln1);
    best = std::max(best, dec);
  }
  return best;
}

}  // namespace

// Class means 0 and 2, population variances 1 and 1, four rows each:
// (4*1 + 4*1) / (4*1 + 4*1) = 1.
TEST(FisherScore, HandCase) {
  Dataset ds = make_dataset({{-1}, {-1}, {1}, {1}, {1}, {1}, {3}, {3}}, {0, 0, 0, 0, 1, 1, 1, 1});
  EXPECT_NEAR(fisher_scores(ds)[0], 1.0, 1e-9);
}

TEST(FisherScore, EqualClassMeansScoreZero) {
  Dataset ds = make_dataset({{1}, {3}, {0}, {4}}, {0, 0, 1, 1});
  EXPECT_EQ(fisher_scores(ds)[0], 0.0);
}

TEST(FisherScore, ConstantColumnScoresZero) {
  Dataset ds = make_dataset({{5}, {5}, {5}, {5}}, {0, 0, 1, 1});
  EXPECT_EQ(fisher_scores(ds)[0], 0.0);
}

TEST(FisherScore, AffineInvariance) {
  Dataset ds = linear_signal(120, 4, 2, 5);
  const auto base = fisher_scores(ds);
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    Dataset t = ds;
    const std::size_t col = rng.index(4);
    double scale = rng.uniform01() * 20.0 - 10.0;
    if (std::abs(scale) < 1e-3) scale = 1.5;
    const double shift = rng.uniform01() * 2000.0 - 1000.0;
    for (std::size_t i = 0; i < t.n_rows(); ++i) t.at(i, col) = t.at(i, col) * scale + shift;
    EXPECT_NEAR(fisher_scores(t)[col], base[col], 1e-9) << "trial " << trial;
  }
}

TEST(FeatureImportances, DecisionTreeFindsSignFeature) {
  Rng rng(31);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 400; ++i) {
    std::vector<double> r(10);
    for (auto& v : r) v = rng.uniform01() * 2.0 - 1.0;
    y.push_back(r[3] > 0.0 ? 1 : 0);
    rows.push_back(std::move(r));
  }
  Dataset ds = make_dataset(rows, y);
  std::vector<double> oracle(10);
  for (std::size_t j = 0; j < 10; ++j) oracle[j] = best_root_gini_decrease(ds, j);
  ASSERT_EQ(argmax(oracle), 3u);

  for (ImportanceMethod m : kClassicalMethods) {
    auto imp = feature_importances(ds, m, 42);
    ASSERT_EQ(imp.scores.size(), 10u);
    for (double s : imp.scores) {
      EXPECT_TRUE(std::isfinite(s));
      EXPECT_GE(s, 0.0);
    }
    EXPECT_EQ(argmax(imp.scores), 3u) << to_string(m);
  }
}

TEST(FeatureImportances, RejectsSingleClass) {
  Dataset ds = make_dataset({{0}, {1}}, {1, 1});
  EXPECT_THROW(feature_importances(ds, ImportanceMethod::fisher_score, 1), DataError);
}

TEST(FeatureImportances, DeterministicGivenSeed) {
  Dataset ds = linear_signal(200, 6, 3, 9);
  for (ImportanceMethod m : kClassicalMethods)
    EXPECT_EQ(feature_importances(ds, m, 5).scores, feature_importances(ds, m, 5).scores) << to_string(m);
}

TEST(SelectByImportance, AboveMean) {
  EXPECT_EQ(select_by_importance({ImportanceMethod::fisher_score, {9, 1, 1, 1}}, SelectionPolicy::above_mean()),
            (FeatureSet{0}));
}

TEST(SelectByImportance, AllEqualFallsBackToFirst) {
  EXPECT_EQ(select_by_importance({ImportanceMethod::fisher_score, {2, 2, 2}}, SelectionPolicy::above_mean()),
            (FeatureSet{0}));
}

TEST(SelectByImportance, TopK) {
  EXPECT_EQ(select_by_importance({ImportanceMethod::logistic, {0.5, 0.9, 0.7}}, SelectionPolicy::top_k(2)),
            (FeatureSet{1, 2}));
  EXPECT_EQ(select_by_importance({ImportanceMethod::logistic, {1, 1, 1}}, SelectionPolicy::top_k(2)),
            (FeatureSet{0, 1}));
  EXPECT_THROW(select_by_importance({ImportanceMethod::logistic, {1, 2}}, SelectionPolicy::top_k(3)), ConfigError);
  EXPECT_THROW(select_by_importance({ImportanceMethod::logistic, {1, 2}}, SelectionPolicy::top_k(0)), ConfigError);
}

TEST(SelectByImportance, NeverEmpty) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(1 + rng.index(12));
    for (auto& v : s) v = rng.uniform01() < 0.3 ? 0.0 : rng.uniform01();
    EXPECT_FALSE(select_by_importance({ImportanceMethod::random_forest, s}, SelectionPolicy::above_mean()).empty());
  }
}

TEST(ClassicalSelections, FourMethodsInOrder) {
  Dataset ds = linear_signal(200, 6, 2, 12);
  auto sel = classical_selections(ds, 42);
  ASSERT_EQ(sel.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(sel[i].method, kClassicalMethods[i]);
    EXPECT_FALSE(sel[i].subset.empty());
  }
}
