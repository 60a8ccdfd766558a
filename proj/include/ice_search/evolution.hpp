#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "feature_set.hpp"
#include "lmops.hpp"
#include "models.hpp"
#include "random.hpp"

namespace ice_search {

struct Provenance {
  enum class Kind { classical, zero_shot, role } kind = Kind::classical;
  std::string method;  // classical method name
  std::string role;
  std::size_t epoch = 0;

  static Provenance classical(std::string method) { return {Kind::classical, std::move(method), {}, 0}; }
  static Provenance zero_shot() { return {Kind::zero_shot, {}, {}, 0}; }
  static Provenance from_role(std::string role, std::size_t epoch) { return {Kind::role, {}, std::move(role), epoch}; }

  std::string label() const {
    switch (kind) {
      case Kind::classical: return "classical:" + method;
      case Kind::zero_shot: return "zero_shot";
      case Kind::role: return "role:" + role + "@" + std::to_string(epoch);
    }
    return {};
  }
};

struct Candidate {
  FeatureSet subset;
  Evaluation evaluation;
  Provenance provenance;
};

// Total order used everywhere candidates are ranked: higher validation
// accuracy, then lower training accuracy, then fewer features, then
// lexicographically smaller member list.
inline bool ranks_before(const Evaluation& ea, const FeatureSet& sa, const Evaluation& eb, const FeatureSet& sb) {
  if (ea.val_accuracy != eb.val_accuracy) return ea.val_accuracy > eb.val_accuracy;
  if (ea.train_accuracy != eb.train_accuracy) return ea.train_accuracy < eb.train_accuracy;
  if (sa.size() != sb.size()) return sa.size() < sb.size();
  return sa < sb;
}

inline bool ranks_before(const Candidate& a, const Candidate& b) {
  return ranks_before(a.evaluation, a.subset, b.evaluation, b.subset);
}

// Population of scored subsets, unique by subset and kept in rank order.
class Pool {
 public:
  Pool() = default;

  // Returns false when the subset is already present; the first entry wins.
  bool insert(Candidate c) {
    if (c.subset.empty()) throw ConfigError("pool candidates must have a non-empty subset");
    if (contains(c.subset)) return false;
    auto pos = std::upper_bound(candidates_.begin(), candidates_.end(), c,
                                [](const Candidate& a, const Candidate& b) { return ranks_before(a, b); });
    candidates_.insert(pos, std::move(c));
    return true;
  }

  bool contains(const FeatureSet& s) const {
    return std::any_of(candidates_.begin(), candidates_.end(), [&](const Candidate& c) { return c.subset == s; });
  }

  const std::vector<Candidate>& candidates() const noexcept { return candidates_; }
  std::size_t size() const noexcept { return candidates_.size(); }
  bool empty() const noexcept { return candidates_.empty(); }
  const Candidate& operator[](std::size_t i) const { return candidates_[i]; }

  std::vector<PoolEntry> snapshot(std::span<const std::string> universe) const {
    std::vector<PoolEntry> out;
    for (const auto& c : candidates_)
      out.push_back({feature_names_of(c.subset, universe), c.evaluation.train_accuracy, c.evaluation.val_accuracy});
    return out;
  }

 private:
  std::vector<Candidate> candidates_;
};

enum class SelectionMode { argmax_val, decision_randomized, decision_randomized_excluding_first };

inline std::string to_string(SelectionMode m) {
  switch (m) {
    case SelectionMode::argmax_val: return "argmax_val";
    case SelectionMode::decision_randomized: return "decision_randomized";
    case SelectionMode::decision_randomized_excluding_first: return "decision_randomized_excluding_first";
  }
  return "unknown";
}

inline SelectionMode selection_mode_from_string(const std::string& s) {
  for (auto m : {SelectionMode::argmax_val, SelectionMode::decision_randomized,
                 SelectionMode::decision_randomized_excluding_first})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown selection mode '" + s + "'");
}

struct EngineConfig {
  std::size_t zero_shot_draws = 5;  // Y
  std::size_t top_keep = 5;         // U
  std::size_t bottom_keep = 3;      // V
  std::size_t epochs = 8;           // E
  std::size_t folds = 10;           // N
  std::vector<std::string> roles = default_roles();
  std::string zero_shot_role = std::string(kDefaultZeroShotRole);
  std::uint64_t seed = 42;
  SelectionMode selection_mode = SelectionMode::argmax_val;
  // One prompt plus re-prompts per role before the role is skipped.
  std::size_t attempts_per_role = 3;

  void validate() const {
    if (top_keep < 1) throw ConfigError("U must be >= 1");
    if (epochs < 1) throw ConfigError("E must be >= 1");
    if (folds < 2) throw ConfigError("N must be >= 2");
    if (zero_shot_draws < 1) throw ConfigError("Y must be >= 1");
    if (attempts_per_role < 1) throw ConfigError("attempts_per_role must be >= 1");
    if (roles.empty()) throw ConfigError("role set must be non-empty");
    for (std::size_t i = 0; i < roles.size(); ++i)
      for (std::size_t j = i + 1; j < roles.size(); ++j)
        if (roles[i] == roles[j]) throw ConfigError("duplicate role '" + roles[i] + "'");
  }
};

struct TraceEntry {
  std::size_t epoch = 0;
  double top_train_accuracy = 0.0;  // mean over the top U slots
  double top_val_accuracy = 0.0;
  std::size_t pool_size = 0;
  std::size_t proposals = 0;  // roles that yielded a parsed subset
  std::size_t skipped_roles = 0;
};

struct ConvergenceTrace {
  std::vector<TraceEntry> epochs;

  // True when the top-U mean validation accuracy never decreases.
  bool is_monotone() const {
    for (std::size_t i = 1; i < epochs.size(); ++i)
      if (epochs[i].top_val_accuracy < epochs[i - 1].top_val_accuracy) return false;
    return true;
  }
};

// Static inputs shared by every phase of a run.
struct SearchContext {
  const Evaluator& evaluator;
  std::string task_description;

  std::span<const std::string> universe() const { return evaluator.dataset().feature_names; }
};

struct SeedSubset {
  FeatureSet subset;
  Provenance provenance;
};

namespace detail {

// Prompts until a response parses or attempts run out.
inline std::optional<FeatureSet> propose(Operator& op, OperatorCall call, const EngineConfig& config,
                                         std::span<const std::string> universe, std::vector<std::string>& warnings) {
  for (std::size_t attempt = 0; attempt < config.attempts_per_role; ++attempt) {
    call.attempt = attempt;
    call.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(call.kind), call.epoch, call.role_index, attempt});
    try {
      return parse_feature_set(op.respond(call).content, universe);
    } catch (const UnparseableResponse& e) {
      warnings.push_back(to_string(call.kind) + " epoch " + std::to_string(call.epoch) + " role '" + call.role +
                         "' attempt " + std::to_string(attempt) + ": " + e.what());
    } catch (const OperatorUnavailable& e) {
      warnings.push_back(to_string(call.kind) + " epoch " + std::to_string(call.epoch) + " role '" + call.role +
                         "' attempt " + std::to_string(attempt) + ": " + e.what());
    } catch (const ProtocolError& e) {
      warnings.push_back(to_string(call.kind) + " epoch " + std::to_string(call.epoch) + " role '" + call.role +
                         "' attempt " + std::to_string(attempt) + ": " + e.what());
    }
  }
  return std::nullopt;
}

inline TraceEntry summarize(const Pool& pool, std::size_t top_keep, std::size_t epoch) {
  TraceEntry t;
  t.epoch = epoch;
  t.pool_size = pool.size();
  const std::size_t k = std::min(top_keep, pool.size());
  double train = 0.0, val = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    train += pool[i].evaluation.train_accuracy;
    val += pool[i].evaluation.val_accuracy;
  }
  // Empty slots count as zero, so the mean stays monotone while the pool is
  // still smaller than U.
  t.top_train_accuracy = train / static_cast<double>(top_keep);
  t.top_val_accuracy = val / static_cast<double>(top_keep);
  return t;
}

}  // namespace detail

// Keeps the U best and V worst candidates under the rank order.
inline Pool filtrate(const Pool& pool, std::size_t top_keep, std::size_t bottom_keep) {
  if (top_keep + bottom_keep >= pool.size()) return pool;
  Pool out;
  const auto& c = pool.candidates();
  for (std::size_t i = 0; i < top_keep; ++i) out.insert(c[i]);
  for (std::size_t i = c.size() - bottom_keep; i < c.size(); ++i) out.insert(c[i]);
  return out;
}

// Scores the classical subsets, then adds the best of Y zero-shot proposals.
inline Pool initialize(const SearchContext& ctx, const EngineConfig& config, std::span<const SeedSubset> classical,
                       Operator& op, std::vector<std::string>& warnings) {
  config.validate();
  if (classical.empty()) throw ConfigError("initialize requires at least one classical subset");
  Pool pool;
  for (const auto& s : classical) pool.insert({s.subset, ctx.evaluator.evaluate(s.subset), s.provenance});

  PromptSpec prompt_spec{ctx.task_description, std::vector<std::string>(ctx.universe().begin(), ctx.universe().end()),
                         std::nullopt, config.zero_shot_role};
  const std::string prompt = build_zero_shot_prompt(prompt_spec);
  std::optional<Candidate> best;
  for (std::size_t draw = 0; draw < config.zero_shot_draws; ++draw) {
    OperatorCall call{CallKind::zero_shot, 0, draw, config.zero_shot_role, 0, 0, prompt};
    auto subset = detail::propose(op, call, config, ctx.universe(), warnings);
    if (!subset) continue;
    Candidate c{*subset, ctx.evaluator.evaluate(*subset), Provenance::zero_shot()};
    if (!best || ranks_before(c, *best)) best = std::move(c);
  }
  if (best)
    pool.insert(std::move(*best));
  else
    warnings.push_back("every zero-shot draw failed; continuing with the classical pool only");
  return pool;
}

// One generation: every role sees the same few-shot prompt built from the
// incoming pool; proposals are scored, merged, and the pool is filtrated.
inline Pool evolve_epoch(const Pool& pool, const SearchContext& ctx, const EngineConfig& config, Operator& op,
                         std::size_t epoch_index, ConvergenceTrace& trace, std::vector<std::string>& warnings) {
  PromptSpec base{ctx.task_description, std::vector<std::string>(ctx.universe().begin(), ctx.universe().end()),
                  pool.snapshot(ctx.universe()), std::nullopt};
  Pool next = pool;
  std::size_t proposals = 0, skipped = 0;
  for (std::size_t r = 0; r < config.roles.size(); ++r) {
    PromptSpec spec = base;
    spec.role = config.roles[r];
    OperatorCall call{CallKind::few_shot, epoch_index, r, config.roles[r], 0, 0, build_few_shot_prompt(spec)};
    auto subset = detail::propose(op, call, config, ctx.universe(), warnings);
    if (!subset) {
      ++skipped;
      continue;
    }
    ++proposals;
    next.insert({*subset, ctx.evaluator.evaluate(*subset), Provenance::from_role(config.roles[r], epoch_index)});
  }
  Pool filtered = filtrate(next, config.top_keep, config.bottom_keep);
  TraceEntry entry = detail::summarize(filtered, config.top_keep, epoch_index);
  entry.proposals = proposals;
  entry.skipped_roles = skipped;
  trace.epochs.push_back(entry);
  return filtered;
}

// Picks the final subset. argmax_val takes the rank-order winner; the
// randomized modes draw uniformly from the top-U slice (optionally without
// its winner), seeded by `seed`.
inline Candidate final_select(const Pool& pool, SelectionMode mode, std::size_t top_keep, std::uint64_t seed) {
  if (pool.empty()) throw ConfigError("final_select on an empty pool");
  if (mode == SelectionMode::argmax_val) return pool[0];
  const std::size_t slice = std::min(std::max<std::size_t>(top_keep, 1), pool.size());
  Rng rng(derive_seed(seed, {0xdec1de}));
  if (mode == SelectionMode::decision_randomized) return pool[rng.index(slice)];
  if (slice < 2) throw ConfigError("decision_randomized_excluding_first needs at least 2 candidates in the top slice");
  return pool[1 + rng.index(slice - 1)];
}

struct RunResult {
  Candidate winner;
  Pool pool;
  ConvergenceTrace trace;
  std::vector<std::string> warnings;
};

inline RunResult run(const SearchContext& ctx, const EngineConfig& config, std::span<const SeedSubset> classical,
                     Operator& op) {
  config.validate();
  std::vector<std::string> warnings;
  Pool pool = initialize(ctx, config, classical, op, warnings);
  ConvergenceTrace trace;
  for (std::size_t e = 1; e <= config.epochs; ++e) pool = evolve_epoch(pool, ctx, config, op, e, trace, warnings);
  Candidate winner = final_select(pool, config.selection_mode, config.top_keep, derive_seed(config.seed, {0xf1a1}));
  return {std::move(winner), std::move(pool), std::move(trace), std::move(warnings)};
}

}  // namespace ice_search
