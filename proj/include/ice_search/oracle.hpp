#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "evolution.hpp"
#include "feature_set.hpp"
#include "models.hpp"
#include "tabular.hpp"

namespace ice_search {

inline constexpr std::size_t kMaxOracleFeatures = 21;
inline constexpr std::size_t kOracleWarnFeatures = 15;

struct RankEntry {
  std::uint64_t mask = 0;
  double test_accuracy = 0.0;
  Evaluation evaluation;
  std::size_t test_rank = 0;
  std::size_t val_rank = 0;
};

// Every non-empty subset of an n-feature universe with its held-out test
// accuracy, CV accuracies, and 1-based ranks. Ranks are a permutation of
// 1..2^n-1: validation ranks follow the engine's candidate order, test ranks
// order by test accuracy, then fewer features, then lexicographic members.
class RankTable {
 public:
  RankTable() = default;
  RankTable(std::vector<std::string> names, std::vector<RankEntry> entries)
      : names_(std::move(names)), entries_(std::move(entries)) {}

  std::size_t n_features() const noexcept { return names_.size(); }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<RankEntry>& entries() const noexcept { return entries_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }

  const RankEntry& entry(const FeatureSet& subset) const {
    if (subset.empty() || !subset.within(n_features()))
      throw ConfigError("rank_of: subset is empty or outside the " + std::to_string(n_features()) + "-feature universe");
    return entries_[subset.mask() - 1];
  }

  std::pair<std::size_t, std::size_t> rank_of(const FeatureSet& subset) const {
    const auto& e = entry(subset);
    return {e.test_rank, e.val_rank};
  }

  void write_csv(std::ostream& out) const {
    out << "bitmask,features,test_accuracy,val_accuracy,train_accuracy,test_rank,val_rank\n";
    for (const auto& e : entries_) {
      out << e.mask << ",\"" << join(feature_names_of(FeatureSet::from_mask(e.mask), names_), "|") << "\","
          << shortest(e.test_accuracy) << ',' << shortest(e.evaluation.val_accuracy) << ','
          << shortest(e.evaluation.train_accuracy) << ',' << e.test_rank << ',' << e.val_rank << '\n';
    }
  }

  static RankTable read_csv(const std::string& path, std::vector<std::string> names) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open rank table '" + path + "'");
    std::string line;
    std::getline(in, line);
    std::vector<RankEntry> entries;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      // bitmask,"names",test,val,train,test_rank,val_rank
      const auto q1 = line.find('"'), q2 = line.find('"', q1 + 1);
      if (q1 == std::string::npos || q2 == std::string::npos) throw ConfigError("malformed rank table row");
      RankEntry e;
      e.mask = std::stoull(line.substr(0, q1 - 1));
      std::vector<std::string> rest;
      std::string cell;
      for (std::size_t i = q2 + 2; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
          rest.push_back(cell);
          cell.clear();
        } else {
          cell += line[i];
        }
      }
      if (rest.size() != 5) throw ConfigError("malformed rank table row");
      e.test_accuracy = std::stod(rest[0]);
      e.evaluation.val_accuracy = std::stod(rest[1]);
      e.evaluation.train_accuracy = std::stod(rest[2]);
      e.test_rank = std::stoull(rest[3]);
      e.val_rank = std::stoull(rest[4]);
      entries.push_back(e);
    }
    const std::size_t expected = (std::uint64_t{1} << names.size()) - 1;
    if (entries.size() != expected) throw ConfigError("rank table row count does not match the feature universe");
    return RankTable(std::move(names), std::move(entries));
  }

 private:
  static std::string shortest(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  }

  std::vector<std::string> names_;
  std::vector<RankEntry> entries_;
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

// Evaluates all 2^n-1 subsets: CV accuracies through `evaluator` (sharing its
// cache with the engine) and test accuracy by training on every CV row and
// scoring `test`. Refuses n above kMaxOracleFeatures; `warn` is called above
// kOracleWarnFeatures.
inline RankTable enumerate_and_rank(const Evaluator& evaluator, const Dataset& test,
                                    const std::function<void(const std::string&)>& warn = {},
                                    std::size_t threads = std::max(1u, std::thread::hardware_concurrency())) {
  const Dataset& train = evaluator.dataset();
  const std::size_t n = train.n_features();
  if (n == 0) throw DataError("enumerate_and_rank: dataset has no features");
  if (n > kMaxOracleFeatures)
    throw CapacityError("exhaustive ranking of " + std::to_string(n) + " features would need " +
                        std::to_string((std::uint64_t{1} << n) - 1) +
                        " cross-validations, which is impractical; the cap is " + std::to_string(kMaxOracleFeatures));
  if (test.n_features() != n) throw DataError("enumerate_and_rank: test split has a different feature count");
  const std::size_t total = (std::size_t{1} << n) - 1;
  if (n > kOracleWarnFeatures && warn)
    warn("exhaustive ranking over " + std::to_string(n) + " features runs " + std::to_string(total) +
         " cross-validations");

  ModelSpec holdout_spec = evaluator.spec();
  holdout_spec.seed = derive_seed(holdout_spec.seed, {0x7e57});
  std::vector<RankEntry> entries(total);
  detail::parallel_for(total, threads, [&](std::size_t i) {
    const std::uint64_t mask = i + 1;
    const FeatureSet subset = FeatureSet::from_mask(mask);
    entries[i].mask = mask;
    entries[i].evaluation = evaluator.evaluate(subset);
    entries[i].test_accuracy = holdout_accuracy(train, test, subset, holdout_spec);
  });

  std::vector<FeatureSet> sets(total);
  for (std::size_t i = 0; i < total; ++i) sets[i] = FeatureSet::from_mask(i + 1);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(entries[a].evaluation, sets[a], entries[b].evaluation, sets[b]);
  });
  for (std::size_t r = 0; r < total; ++r) entries[order[r]].val_rank = r + 1;

  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (entries[a].test_accuracy != entries[b].test_accuracy) return entries[a].test_accuracy > entries[b].test_accuracy;
    if (sets[a].size() != sets[b].size()) return sets[a].size() < sets[b].size();
    return sets[a] < sets[b];
  });
  for (std::size_t r = 0; r < total; ++r) entries[order[r]].test_rank = r + 1;

  return RankTable(train.feature_names, std::move(entries));
}

}  // namespace ice_search
