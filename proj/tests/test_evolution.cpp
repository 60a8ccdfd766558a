#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>

#include "ice_search/evolution.hpp"
#include "support.hpp"

using namespace ice_search;
using ice_search::testing::planted_signal;

namespace {

Candidate cand(double val, double train, FeatureSet s) {
  Evaluation e;
  e.val_accuracy = val;
  e.train_accuracy = train;
  e.n_folds = 10;
  return {std::move(s), e, Provenance::zero_shot()};
}

// Random pool over a 6-feature universe with heavily repeated accuracies.
Pool random_pool(Rng& rng, std::size_t target) {
  Pool pool;
  while (pool.size() < target) {
    const FeatureSet s = FeatureSet::from_mask(1 + rng.index(63));
    pool.insert(cand(0.5 + 0.1 * static_cast<double>(rng.index(4)), 0.6 + 0.1 * static_cast<double>(rng.index(3)), s));
  }
  return pool;
}

class FnOperator final : public Operator {
 public:
  explicit FnOperator(std::function<std::string(const OperatorCall&)> fn) : fn_(std::move(fn)) {}
  OperatorReply respond(const OperatorCall& call) override {
    calls.push_back(call);
    return {fn_(call), {}};
  }
  std::vector<OperatorCall> calls;

 private:
  std::function<std::string(const OperatorCall&)> fn_;
};

struct PlantedFixture {
  Dataset ds = planted_signal(600, 10, 0.1, 5);
  Evaluator evaluator{ds, ModelSpec::defaults(ModelKind::logistic_regression), stratified_folds(ds, 5, 42)};
  SearchContext ctx{evaluator, "predict the planted label"};
  std::vector<SeedSubset> classical{{FeatureSet{9}, Provenance::classical("fisher_score")},
                                    {FeatureSet{8, 9}, Provenance::classical("logistic")},
                                    {FeatureSet{3, 4}, Provenance::classical("decision_tree")},
                                    {FeatureSet{5}, Provenance::classical("random_forest")}};
  std::vector<FeatureSet> script{{0, 1},    {5, 6}, {0, 1, 2, 3}, {9},         {1, 2},
                                 {0, 1, 2}, {3, 4}, {0, 2, 7},    {0, 1, 2, 8}, {6, 7, 8}};

  EngineConfig config(std::size_t epochs = 3) const {
    EngineConfig c;
    c.epochs = epochs;
    c.folds = 5;
    return c;
  }
};

}  // namespace

TEST(RanksBefore, IsAStrictTotalOrder) {
  Rng rng(3);
  std::vector<Candidate> cs;
  for (int i = 0; i < 60; ++i)
    cs.push_back(cand(0.5 + 0.1 * static_cast<double>(rng.index(3)), 0.6 + 0.1 * static_cast<double>(rng.index(2)),
                      FeatureSet::from_mask(1 + rng.index(15))));
  for (const auto& a : cs) {
    EXPECT_FALSE(ranks_before(a, a));
    for (const auto& b : cs) {
      if (a.subset == b.subset) continue;
      EXPECT_NE(ranks_before(a, b), ranks_before(b, a));
      for (const auto& c : cs)
        if (ranks_before(a, b) && ranks_before(b, c)) {
          EXPECT_TRUE(ranks_before(a, c));
        }
    }
  }
}

TEST(RanksBefore, TieBreakChain) {
  EXPECT_TRUE(ranks_before(cand(0.9, 0.99, {0, 1, 2}), cand(0.8, 0.5, {0})));
  EXPECT_TRUE(ranks_before(cand(0.9, 0.7, {0, 1, 2}), cand(0.9, 0.8, {0})));
  EXPECT_TRUE(ranks_before(cand(0.9, 0.8, {4}), cand(0.9, 0.8, {0, 1})));
  EXPECT_TRUE(ranks_before(cand(0.9, 0.8, {0, 3}), cand(0.9, 0.8, {1, 2})));
}

TEST(Pool, KeepsRankOrderAndFirstEntryWins) {
  Pool pool;
  EXPECT_TRUE(pool.insert(cand(0.7, 0.8, {1})));
  EXPECT_TRUE(pool.insert(cand(0.9, 0.8, {2})));
  EXPECT_FALSE(pool.insert(cand(0.99, 0.8, {1})));
  EXPECT_TRUE(pool.insert(cand(0.8, 0.8, {3})));
  ASSERT_EQ(pool.size(), 3u);
  EXPECT_EQ(pool[0].subset, (FeatureSet{2}));
  EXPECT_EQ(pool[2].subset, (FeatureSet{1}));
  EXPECT_EQ(pool[2].evaluation.val_accuracy, 0.7);
  EXPECT_THROW(pool.insert(cand(0.5, 0.5, FeatureSet{})), ConfigError);
}

TEST(Filtrate, TwentyFiveCandidatesBecomeEight) {
  Pool pool;
  for (std::uint64_t m = 1; m <= 25; ++m) pool.insert(cand(0.5 + 0.01 * static_cast<double>(m), 0.9, FeatureSet::from_mask(m)));
  const Pool out = filtrate(pool, 5, 3);
  ASSERT_EQ(out.size(), 8u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(out[i].subset, pool[i].subset);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out[5 + i].subset, pool[22 + i].subset);
}

TEST(Filtrate, SmallPoolsPassThrough) {
  Pool pool;
  for (std::uint64_t m = 1; m <= 8; ++m) pool.insert(cand(0.6, 0.6, FeatureSet::from_mask(m)));
  EXPECT_EQ(filtrate(pool, 5, 3).size(), 8u);
  EXPECT_EQ(filtrate(pool, 5, 0).size(), 5u);
  EXPECT_EQ(filtrate(pool, 10, 3).size(), 8u);
}

TEST(Filtrate, KeepsTopUAndBottomVProperty) {
  Rng rng(2718);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(40), U = 1 + rng.index(8), V = rng.index(5);
    const Pool pool = random_pool(rng, n);
    const Pool out = filtrate(pool, U, V);
    ASSERT_LE(out.size(), U + V);
    std::set<std::uint64_t> expected, got;
    for (std::size_t i = 0; i < n; ++i)
      if (i < U || i + V >= n) expected.insert(pool[i].subset.mask());
    for (const auto& c : out.candidates()) got.insert(c.subset.mask());
    ASSERT_EQ(got, expected) << "trial " << trial;
    ASSERT_TRUE(std::is_sorted(out.candidates().begin(), out.candidates().end(),
                               [](const Candidate& a, const Candidate& b) { return ranks_before(a, b); }));
  }
}

TEST(FinalSelect, EqualTopValidationPicksLowestTrain) {
  std::vector<Candidate> cs{cand(0.9, 0.95, {0}), cand(0.9, 0.91, {1}), cand(0.9, 0.93, {2}),
                            cand(0.8, 0.50, {3}), cand(0.9, 0.97, {4}), cand(0.7, 0.40, {5})};
  std::vector<std::size_t> order(cs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  do {
    Pool pool;
    for (std::size_t i : order) pool.insert(cs[i]);
    ASSERT_EQ(final_select(pool, SelectionMode::argmax_val, 5, 1).subset, (FeatureSet{1}));
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(FinalSelect, RandomizedDrawsAreUniformOverTopSlice) {
  Pool pool;
  for (std::uint64_t m = 1; m <= 8; ++m) pool.insert(cand(0.5 + 0.01 * static_cast<double>(m), 0.9, FeatureSet::from_mask(m)));
  std::vector<int> hits(8, 0);
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const Candidate c = final_select(pool, SelectionMode::decision_randomized, 5, s);
    for (std::size_t i = 0; i < 8; ++i)
      if (pool[i].subset == c.subset) ++hits[i];
  }
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(hits[i] / 10000.0, 0.2, 0.02) << i;
  for (std::size_t i = 5; i < 8; ++i) EXPECT_EQ(hits[i], 0);
}

TEST(FinalSelect, ExcludingFirstNeverReturnsTheWinner) {
  Pool pool;
  for (std::uint64_t m = 1; m <= 6; ++m) pool.insert(cand(0.5 + 0.01 * static_cast<double>(m), 0.9, FeatureSet::from_mask(m)));
  for (std::uint64_t s = 0; s < 2000; ++s)
    EXPECT_NE(final_select(pool, SelectionMode::decision_randomized_excluding_first, 5, s).subset, pool[0].subset);
  Pool single;
  single.insert(cand(0.5, 0.5, {0}));
  EXPECT_THROW(final_select(single, SelectionMode::decision_randomized_excluding_first, 5, 0), ConfigError);
  EXPECT_THROW(final_select(Pool{}, SelectionMode::argmax_val, 5, 0), ConfigError);
}

TEST(FinalSelect, SameSeedSameDraw) {
  Pool pool;
  for (std::uint64_t m = 1; m <= 6; ++m) pool.insert(cand(0.6, 0.9, FeatureSet::from_mask(m)));
  for (std::uint64_t s = 0; s < 50; ++s)
    EXPECT_EQ(final_select(pool, SelectionMode::decision_randomized, 5, s).subset,
              final_select(pool, SelectionMode::decision_randomized, 5, s).subset);
}

TEST(EngineConfig, Validation) {
  EngineConfig c;
  EXPECT_NO_THROW(c.validate());
  c.top_keep = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EngineConfig{};
  c.roles = {"Nurse", "Nurse"};
  EXPECT_THROW(c.validate(), ConfigError);
  c = EngineConfig{};
  c.folds = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(EngineConfig{}.roles.size(), 17u);
}

TEST(Initialize, DeduplicatesAndAddsBestZeroShot) {
  PlantedFixture f;
  std::vector<SeedSubset> classical = f.classical;
  classical.push_back({FeatureSet{9}, Provenance::classical("duplicate")});
  const std::vector<std::string> answers{"f5, f6", "f0, f1, f2", "f3"};
  FnOperator op([&](const OperatorCall& c) { return answers[c.role_index % answers.size()]; });
  std::vector<std::string> warnings;
  const Pool pool = initialize(f.ctx, f.config(), classical, op, warnings);
  EXPECT_EQ(pool.size(), 5u);
  EXPECT_EQ(op.calls.size(), 5u);
  EXPECT_TRUE(pool.contains(FeatureSet{0, 1, 2}));
  EXPECT_FALSE(pool.contains(FeatureSet{5, 6}));
  EXPECT_EQ(pool[0].subset, (FeatureSet{0, 1, 2}));
  EXPECT_EQ(pool[0].provenance.label(), "zero_shot");
  for (const auto& c : op.calls) {
    EXPECT_EQ(c.kind, CallKind::zero_shot);
    EXPECT_EQ(c.prompt.rfind("Imagine you are a medical doctor.", 0), 0u);
  }
  EXPECT_TRUE(warnings.empty());
}

TEST(Initialize, AllDrawsFailingKeepsClassicalPool) {
  PlantedFixture f;
  FnOperator op([](const OperatorCall&) -> std::string { throw OperatorUnavailable("offline"); });
  std::vector<std::string> warnings;
  const Pool pool = initialize(f.ctx, f.config(), f.classical, op, warnings);
  EXPECT_EQ(pool.size(), 4u);
  EXPECT_EQ(op.calls.size(), 5u * 3u);
  EXPECT_FALSE(warnings.empty());
  EXPECT_NE(warnings.back().find("every zero-shot draw failed"), std::string::npos);
}

TEST(EvolveEpoch, TwentyFiveCandidatesFilterToEight) {
  PlantedFixture f;
  Pool pool;
  for (const auto& s : f.classical) pool.insert({s.subset, f.evaluator.evaluate(s.subset), s.provenance});
  // 4 incoming plus 21 distinct proposals.
  std::vector<std::string> answers;
  for (std::uint64_t m = 1; answers.size() < 21; ++m) {
    const FeatureSet s = FeatureSet::from_mask(m);
    if (pool.contains(s)) continue;
    answers.push_back(render_feature_set(s, f.ds.feature_names));
  }
  EngineConfig config = f.config();
  config.roles.clear();
  for (std::size_t i = 0; i < 21; ++i) config.roles.push_back("role " + std::to_string(i));
  FnOperator op([&](const OperatorCall& c) { return answers[c.role_index]; });
  ConvergenceTrace trace;
  std::vector<std::string> warnings;
  const Pool out = evolve_epoch(pool, f.ctx, config, op, 1, trace, warnings);
  EXPECT_EQ(out.size(), 8u);
  ASSERT_EQ(trace.epochs.size(), 1u);
  EXPECT_EQ(trace.epochs[0].proposals, 21u);
  EXPECT_EQ(trace.epochs[0].pool_size, 8u);
}

TEST(EvolveEpoch, RepeatedIncumbentsLeavePoolUnchanged) {
  PlantedFixture f;
  Pool pool;
  for (const auto& s : f.classical) pool.insert({s.subset, f.evaluator.evaluate(s.subset), s.provenance});
  FnOperator op([&](const OperatorCall& c) {
    return render_feature_set(f.classical[c.role_index % f.classical.size()].subset, f.ds.feature_names);
  });
  ConvergenceTrace trace;
  std::vector<std::string> warnings;
  const Pool out = evolve_epoch(pool, f.ctx, f.config(), op, 1, trace, warnings);
  ASSERT_EQ(out.size(), pool.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].subset, pool[i].subset);
    EXPECT_EQ(out[i].provenance.label(), pool[i].provenance.label());
  }
}

TEST(EvolveEpoch, UnparseableRolesAreSkippedAfterThreeAttempts) {
  PlantedFixture f;
  Pool pool;
  for (const auto& s : f.classical) pool.insert({s.subset, f.evaluator.evaluate(s.subset), s.provenance});
  EngineConfig config = f.config();
  config.roles = {"Nurse", "Pharmacist"};
  FnOperator op([](const OperatorCall& c) -> std::string {
    if (c.role == "Nurse") return "no idea";
    return c.attempt < 2 ? "hmm" : "f0, f1, f2";
  });
  ConvergenceTrace trace;
  std::vector<std::string> warnings;
  const Pool out = evolve_epoch(pool, f.ctx, config, op, 1, trace, warnings);
  EXPECT_EQ(op.calls.size(), 6u);
  EXPECT_EQ(trace.epochs[0].skipped_roles, 1u);
  EXPECT_EQ(trace.epochs[0].proposals, 1u);
  EXPECT_EQ(warnings.size(), 5u);
  EXPECT_TRUE(out.contains(FeatureSet{0, 1, 2}));
  // Re-prompts get distinct seeds.
  EXPECT_NE(op.calls[0].seed, op.calls[1].seed);
}

TEST(EvolveEpoch, EveryRoleSeesTheSamePoolListing) {
  PlantedFixture f;
  Pool pool;
  for (const auto& s : f.classical) pool.insert({s.subset, f.evaluator.evaluate(s.subset), s.provenance});
  FnOperator op([&](const OperatorCall& c) { return render_feature_set(f.script[c.role_index % 10], f.ds.feature_names); });
  ConvergenceTrace trace;
  std::vector<std::string> warnings;
  evolve_epoch(pool, f.ctx, f.config(), op, 1, trace, warnings);
  ASSERT_EQ(op.calls.size(), 17u);
  auto listing = [](const std::string& p) { return p.substr(p.find("Here are")); };
  for (const auto& c : op.calls) EXPECT_EQ(listing(c.prompt), listing(op.calls[0].prompt));
}

TEST(Run, DeterministicForFixedSeedAndScript) {
  PlantedFixture f;
  ScriptedOperator a(f.script, f.ds.feature_names), b(f.script, f.ds.feature_names);
  const RunResult ra = run(f.ctx, f.config(), f.classical, a);
  const RunResult rb = run(f.ctx, f.config(), f.classical, b);
  EXPECT_EQ(ra.winner.subset, rb.winner.subset);
  ASSERT_EQ(ra.pool.size(), rb.pool.size());
  for (std::size_t i = 0; i < ra.pool.size(); ++i) EXPECT_EQ(ra.pool[i].subset, rb.pool[i].subset);
  ASSERT_EQ(ra.trace.epochs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ra.trace.epochs[i].top_val_accuracy, rb.trace.epochs[i].top_val_accuracy);
}

TEST(Run, RecoversPlantedSignalWithMonotoneTrace) {
  PlantedFixture f;
  ScriptedOperator op(f.script, f.ds.feature_names);
  const RunResult r = run(f.ctx, f.config(4), f.classical, op);
  for (std::size_t j : {0u, 1u, 2u}) EXPECT_TRUE(r.winner.subset.contains(j));
  EXPECT_TRUE(r.trace.is_monotone());
  EXPECT_EQ(r.winner.subset, r.pool[0].subset);
}

TEST(Run, TraceIsMonotoneEvenWhilePoolIsSmall) {
  PlantedFixture f;
  EngineConfig config = f.config(4);
  config.roles = {"Nurse"};
  // One fresh, progressively worse subset per epoch.
  const std::vector<std::string> answers{"f3", "f4", "f5", "f6", "f7"};
  FnOperator op([&](const OperatorCall& c) { return answers[c.epoch]; });
  const std::vector<SeedSubset> classical{{FeatureSet{0, 1, 2}, Provenance::classical("fisher_score")}};
  const RunResult r = run(f.ctx, config, classical, op);
  EXPECT_TRUE(r.trace.is_monotone());
  EXPECT_EQ(r.trace.epochs.back().pool_size, 6u);
}

// With V = 0 the search is purely elitist: the final pool must be the top U
// of everything that was ever scored.
TEST(Run, ZeroBottomKeepIsElitist) {
  PlantedFixture f;
  EngineConfig config = f.config(3);
  config.bottom_keep = 0;
  config.zero_shot_draws = 1;
  ScriptedOperator inner(f.script, f.ds.feature_names);
  std::vector<FeatureSet> proposed;
  FnOperator op([&](const OperatorCall& c) {
    const std::string s = inner.respond(c).content;
    proposed.push_back(parse_feature_set(s, f.ds.feature_names));
    return s;
  });
  const RunResult r = run(f.ctx, config, f.classical, op);
  Pool all;
  for (const auto& s : f.classical) all.insert({s.subset, f.evaluator.evaluate(s.subset), s.provenance});
  for (const auto& s : proposed) all.insert({s, f.evaluator.evaluate(s), Provenance::zero_shot()});
  ASSERT_EQ(r.pool.size(), std::min<std::size_t>(5, all.size()));
  for (std::size_t i = 0; i < r.pool.size(); ++i) EXPECT_EQ(r.pool[i].subset, all[i].subset);
}

TEST(Run, CachedEvaluationsMatchRecomputation) {
  PlantedFixture f;
  ScriptedOperator op(f.script, f.ds.feature_names);
  const RunResult r = run(f.ctx, f.config(2), f.classical, op);
  for (const auto& c : r.pool.candidates()) EXPECT_EQ(c.evaluation, f.evaluator.recompute(c.subset));
}

TEST(Run, RandomizedModeDrawsFromTopSlice) {
  PlantedFixture f;
  EngineConfig config = f.config(2);
  config.selection_mode = SelectionMode::decision_randomized;
  ScriptedOperator op(f.script, f.ds.feature_names);
  const RunResult r = run(f.ctx, config, f.classical, op);
  bool in_top = false;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, r.pool.size()); ++i) in_top |= r.pool[i].subset == r.winner.subset;
  EXPECT_TRUE(in_top);
}

TEST(SelectionMode, StringRoundTrip) {
  for (auto m : {SelectionMode::argmax_val, SelectionMode::decision_randomized,
                 SelectionMode::decision_randomized_excluding_first})
    EXPECT_EQ(selection_mode_from_string(to_string(m)), m);
  EXPECT_THROW(selection_mode_from_string("best"), ConfigError);
}
