#pragma once

// Experiment pipeline behind the command-line tool: configuration, per-seed
// data preparation, the run / rank / baselines / replay commands, and report
// emission.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "baselines.hpp"
#include "errors.hpp"
#include "evolution.hpp"
#include "lmops.hpp"
#include "models.hpp"
#include "oracle.hpp"
#include "tabular.hpp"

namespace ice_search {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct PreprocessConfig {
  bool impute = true;
  bool smote = true;
  std::size_t smote_k = 5;
};

struct RunConfig {
  std::string data_path;
  std::string target_column;
  std::vector<std::string> drop_columns;
  std::string task_description;
  PreprocessConfig preprocess;
  EngineConfig engine;
  ModelSpec model = ModelSpec::defaults(ModelKind::gradient_boosted_trees);
  std::optional<LmEndpoint> endpoint;
  std::optional<std::string> script_path;
  std::vector<std::uint64_t> seeds{42, 43, 44, 45, 46};
  double test_fraction = 0.3;
  std::string output_dir = "ice_search_out";
  bool with_ranks = false;
  SelectionPolicy baseline_policy = SelectionPolicy::above_mean();
  std::size_t threads = 0;  // 0: hardware concurrency
  bool parallel_seeds = false;

  std::size_t worker_threads() const {
    return threads ? threads : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  }

  // `needs_operator`: exactly one of endpoint / script must be set.
  void validate(bool needs_operator) const {
    if (data_path.empty()) throw ConfigError("config: 'data' is required");
    if (target_column.empty()) throw ConfigError("config: 'target' is required");
    if (seeds.empty()) throw ConfigError("config: 'seeds' must be non-empty");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("config: 'test_fraction' must lie in (0, 1)");
    if (endpoint && script_path) throw ConfigError("config: set exactly one of 'endpoint' and 'script', not both");
    if (needs_operator && !endpoint && !script_path)
      throw ConfigError("config: set exactly one of 'endpoint' and 'script'");
    if (endpoint) endpoint->validate();
    engine.validate();
    model.validate();
  }
};

namespace detail {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::string resolve(const std::string& path, const fs::path& base) {
  if (path.empty() || fs::path(path).is_absolute() || base.empty()) return path;
  return (base / path).lexically_normal().string();
}

}  // namespace detail

// Builds a RunConfig from its JSON document. Relative paths are resolved
// against `base_dir`.
inline RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  RunConfig c;
  try {
    detail::read_if(j, "data", c.data_path);
    detail::read_if(j, "target", c.target_column);
    detail::read_if(j, "drop_columns", c.drop_columns);
    detail::read_if(j, "task_description", c.task_description);
    detail::read_if(j, "seeds", c.seeds);
    detail::read_if(j, "test_fraction", c.test_fraction);
    detail::read_if(j, "output_dir", c.output_dir);
    detail::read_if(j, "with_ranks", c.with_ranks);
    detail::read_if(j, "threads", c.threads);
    detail::read_if(j, "parallel_seeds", c.parallel_seeds);
    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      detail::read_if(p, "impute", c.preprocess.impute);
      detail::read_if(p, "smote", c.preprocess.smote);
      detail::read_if(p, "smote_k", c.preprocess.smote_k);
    }
    if (j.contains("engine")) {
      const auto& e = j.at("engine");
      auto& g = c.engine;
      for (auto [a, b, field] : {std::tuple{"zero_shot_draws", "Y", &g.zero_shot_draws},
                                 std::tuple{"top_keep", "U", &g.top_keep}, std::tuple{"bottom_keep", "V", &g.bottom_keep},
                                 std::tuple{"epochs", "E", &g.epochs}, std::tuple{"folds", "N", &g.folds},
                                 std::tuple{"attempts_per_role", "attempts_per_role", &g.attempts_per_role}}) {
        detail::read_if(e, a, *field);
        detail::read_if(e, b, *field);
      }
      detail::read_if(e, "roles", g.roles);
      detail::read_if(e, "zero_shot_role", g.zero_shot_role);
      if (e.contains("selection_mode")) g.selection_mode = selection_mode_from_string(e.at("selection_mode"));
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model = ModelSpec::defaults(model_kind_from_string(m.value("kind", "gradient_boosted_trees")));
      detail::read_if(m, "learning_rate", c.model.learning_rate);
      detail::read_if(m, "epochs", c.model.epochs);
      detail::read_if(m, "regularization", c.model.regularization);
      detail::read_if(m, "max_depth", c.model.max_depth);
      detail::read_if(m, "n_trees", c.model.n_trees);
      detail::read_if(m, "rounds", c.model.rounds);
    }
    if (j.contains("endpoint") && !j.at("endpoint").is_null()) {
      const auto& e = j.at("endpoint");
      LmEndpoint ep;
      detail::read_if(e, "base_url", ep.base_url);
      detail::read_if(e, "model_name", ep.model_name);
      detail::read_if(e, "temperature", ep.temperature);
      detail::read_if(e, "top_p", ep.top_p);
      detail::read_if(e, "max_retries", ep.max_retries);
      detail::read_if(e, "api_key_env", ep.api_key_env);
      if (e.contains("timeout_ms")) ep.timeout = std::chrono::milliseconds(e.at("timeout_ms").get<long long>());
      if (e.contains("backoff_ms")) ep.initial_backoff = std::chrono::milliseconds(e.at("backoff_ms").get<long long>());
      c.endpoint = ep;
    }
    if (j.contains("script") && !j.at("script").is_null()) c.script_path = j.at("script").get<std::string>();
    if (j.contains("baseline_selection")) {
      const auto& b = j.at("baseline_selection");
      if (b.is_string() && b.get<std::string>() == "above_mean")
        c.baseline_policy = SelectionPolicy::above_mean();
      else if (b.is_object() && b.contains("top_k"))
        c.baseline_policy = SelectionPolicy::top_k(b.at("top_k").get<std::size_t>());
      else
        throw ConfigError("config: 'baseline_selection' must be \"above_mean\" or {\"top_k\": k}");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.data_path = detail::resolve(c.data_path, base_dir);
  c.output_dir = detail::resolve(c.output_dir, base_dir);
  if (c.script_path) c.script_path = detail::resolve(*c.script_path, base_dir);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  return run_config_from_json(j, fs::path(path).parent_path());
}

// Data for one seed: SMOTE (when enabled) touches only the training side.
struct PreparedSeed {
  std::uint64_t seed = 0;
  Dataset train;
  Dataset test;
  FoldAssignment folds;
  ModelSpec model;
};

inline Dataset load_dataset(const RunConfig& config) {
  Dataset ds = load_csv(config.data_path, config.target_column, config.drop_columns);
  ds.task_description = config.task_description;
  if (config.preprocess.impute) ds = impute_median(ds);
  return ds;
}

inline PreparedSeed prepare_seed(const RunConfig& config, const Dataset& dataset, std::uint64_t seed) {
  PreparedSeed p;
  p.seed = seed;
  const TrainTestSplit split = stratified_split(dataset, config.test_fraction, seed);
  p.train = dataset.select_rows(split.train_rows);
  p.test = dataset.select_rows(split.test_rows);
  if (config.preprocess.smote) p.train = smote_balance(p.train, config.preprocess.smote_k, seed);
  p.folds = stratified_folds(p.train, config.engine.folds, seed);
  p.model = config.model;
  p.model.seed = seed;
  return p;
}

// Same model the oracle uses for test accuracy, so pool test scores agree
// with rank-table entries.
inline ModelSpec holdout_spec(const ModelSpec& spec) {
  ModelSpec s = spec;
  s.seed = derive_seed(spec.seed, {0x7e57});
  return s;
}

inline std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

inline ordered_json subset_json(const FeatureSet& s, std::span<const std::string> names) {
  ordered_json j;
  j["features"] = feature_names_of(s, names);
  j["indices"] = std::vector<std::size_t>(s.begin(), s.end());
  return j;
}

inline std::string ordinal(std::size_t n) {
  const std::size_t mod100 = n % 100;
  const char* suffix = (mod100 >= 11 && mod100 <= 13) ? "th"
                       : n % 10 == 1                  ? "st"
                       : n % 10 == 2                  ? "nd"
                       : n % 10 == 3                  ? "rd"
                                                      : "th";
  return std::to_string(n) + suffix;
}

inline std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string trace_csv(const ConvergenceTrace& trace) {
  std::ostringstream out;
  out << "epoch,top_train_accuracy_pct,top_val_accuracy_pct,pool_size,proposals,skipped_roles\n";
  for (const auto& e : trace.epochs)
    out << e.epoch << ',' << format_percent(e.top_train_accuracy) << ',' << format_percent(e.top_val_accuracy) << ','
        << e.pool_size << ',' << e.proposals << ',' << e.skipped_roles << '\n';
  return out.str();
}

inline std::unique_ptr<RankTable> build_rank_table(const RunConfig& config, const Evaluator& evaluator,
                                                   const PreparedSeed& p, const fs::path& seed_dir) {
  auto table = std::make_unique<RankTable>(enumerate_and_rank(
      evaluator, p.test, [](const std::string& m) { std::cerr << "warning: " << m << '\n'; }, config.worker_threads()));
  std::ostringstream csv;
  table->write_csv(csv);
  write_text(seed_dir / "ranktable.csv", csv.str());
  return table;
}

template <typename Fn>
void for_each_seed(const RunConfig& config, Fn fn) {
  if (config.parallel_seeds)
    detail::parallel_for(config.seeds.size(), config.seeds.size(), fn);
  else
    for (std::size_t i = 0; i < config.seeds.size(); ++i) fn(i);
}

inline void refuse_oversized(const Dataset& ds) {
  if (ds.n_features() > kMaxOracleFeatures)
    throw CapacityError("dataset has " + std::to_string(ds.n_features()) +
                        " features; exhaustive ranking is impractical beyond " + std::to_string(kMaxOracleFeatures));
}

}  // namespace detail

enum class OperatorSource { configured, replay };

struct CommandResult {
  int exit_code = 0;
  ordered_json report;
  std::vector<std::string> errors;
};

// The full experiment: per seed, load -> impute -> split -> SMOTE train ->
// folds -> classical baselines -> evolutionary search -> score the final pool
// on the held-out split. Writes report.json, report.md and per-seed
// transcript.jsonl / convergence.csv (plus ranktable.csv with ranks enabled).
// With `replay_dir`, operator answers come from replay_dir/seed_*/transcript.jsonl.
inline CommandResult cmd_run(const RunConfig& config, const std::optional<std::string>& replay_dir = std::nullopt) {
  config.validate(!replay_dir);
  const Dataset dataset = load_dataset(config);
  if (config.with_ranks) detail::refuse_oversized(dataset);
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);

  std::vector<ordered_json> sections(config.seeds.size());
  std::vector<std::optional<std::string>> failures(config.seeds.size());
  detail::for_each_seed(config, [&](std::size_t si) {
    const std::uint64_t seed = config.seeds[si];
    ordered_json section;
    section["seed"] = seed;
    try {
      const PreparedSeed p = prepare_seed(config, dataset, seed);
      const Evaluator evaluator(p.train, p.model, p.folds);
      const auto names = p.train.feature_names;

      std::vector<SeedSubset> classical;
      for (auto& sel : classical_selections(p.train, seed, config.baseline_policy))
        classical.push_back({sel.subset, Provenance::classical(to_string(sel.method))});

      const fs::path seed_dir = out_dir / seed_dir_name(seed);
      fs::create_directories(seed_dir);
      std::unique_ptr<Operator> inner;
      if (replay_dir) {
        inner = std::make_unique<ReplayOperator>(ReplayOperator::from_file(
            (fs::path(*replay_dir) / seed_dir_name(seed) / "transcript.jsonl").string()));
      } else if (config.script_path) {
        inner = std::make_unique<ScriptedOperator>(load_script(*config.script_path, names), names);
      } else {
        inner = std::make_unique<EndpointOperator>(*config.endpoint);
      }
      std::ofstream transcript(seed_dir / "transcript.jsonl", std::ios::binary);
      TranscriptRecorder recorder(*inner, transcript);

      EngineConfig engine = config.engine;
      engine.seed = seed;
      const SearchContext ctx{evaluator, config.task_description};
      RunResult result = run(ctx, engine, classical, recorder);

      std::unique_ptr<RankTable> table;
      if (config.with_ranks) table = detail::build_rank_table(config, evaluator, p, seed_dir);

      const ModelSpec test_spec = holdout_spec(p.model);
      auto candidate_json = [&](const Candidate& c) {
        ordered_json j = detail::subset_json(c.subset, names);
        j["train_accuracy_pct"] = rounded_percent(c.evaluation.train_accuracy);
        j["val_accuracy_pct"] = rounded_percent(c.evaluation.val_accuracy);
        j["test_accuracy_pct"] = rounded_percent(holdout_accuracy(p.train, p.test, c.subset, test_spec));
        j["provenance"] = c.provenance.label();
        if (table) {
          auto [test_rank, val_rank] = table->rank_of(c.subset);
          j["test_rank"] = test_rank;
          j["val_rank"] = val_rank;
        }
        return j;
      };

      section["rows"] = {{"train", p.train.n_rows()}, {"test", p.test.n_rows()}};
      section["selection_mode"] = to_string(engine.selection_mode);
      section["winner"] = candidate_json(result.winner);
      ordered_json pool = ordered_json::array();
      for (const auto& c : result.pool.candidates()) pool.push_back(candidate_json(c));
      section["pool"] = pool;
      ordered_json trace = ordered_json::array();
      for (const auto& e : result.trace.epochs)
        trace.push_back({{"epoch", e.epoch},
                         {"top_train_accuracy_pct", rounded_percent(e.top_train_accuracy)},
                         {"top_val_accuracy_pct", rounded_percent(e.top_val_accuracy)},
                         {"pool_size", e.pool_size},
                         {"proposals", e.proposals},
                         {"skipped_roles", e.skipped_roles}});
      section["trace"] = trace;
      section["warnings"] = result.warnings;
      section["transcript"] = seed_dir_name(seed) + "/transcript.jsonl";
      detail::write_text(seed_dir / "convergence.csv", detail::trace_csv(result.trace));
    } catch (const Error& e) {
      section["error"] = e.what();
      failures[si] = e.what();
    }
    sections[si] = std::move(section);
  });

  CommandResult out;
  ordered_json& report = out.report;
  report["command"] = "run";
  report["config"] = {{"data", fs::path(config.data_path).filename().string()},
                      {"target", config.target_column},
                      {"model", to_string(config.model.kind)},
                      {"Y", config.engine.zero_shot_draws},
                      {"U", config.engine.top_keep},
                      {"V", config.engine.bottom_keep},
                      {"E", config.engine.epochs},
                      {"N", config.engine.folds},
                      {"roles", config.engine.roles.size()},
                      {"selection_mode", to_string(config.engine.selection_mode)},
                      {"test_fraction", config.test_fraction},
                      {"smote", config.preprocess.smote}};
  report["seeds"] = sections;

  double test_rank_sum = 0.0, val_rank_sum = 0.0, test_acc_sum = 0.0;
  std::size_t ranked = 0, scored = 0;
  for (const auto& s : sections) {
    if (!s.contains("winner")) continue;
    ++scored;
    test_acc_sum += s["winner"]["test_accuracy_pct"].get<double>();
    if (s["winner"].contains("test_rank")) {
      ++ranked;
      test_rank_sum += s["winner"]["test_rank"].get<double>();
      val_rank_sum += s["winner"]["val_rank"].get<double>();
    }
  }
  ordered_json aggregate;
  aggregate["seeds_completed"] = scored;
  if (scored) aggregate["mean_test_accuracy_pct"] = std::floor(test_acc_sum / static_cast<double>(scored) * 1000.0 + 0.5) / 1000.0;
  if (ranked) {
    aggregate["mean_test_rank"] = test_rank_sum / static_cast<double>(ranked);
    aggregate["mean_val_rank"] = val_rank_sum / static_cast<double>(ranked);
  }
  report["aggregate"] = aggregate;

  for (std::size_t i = 0; i < failures.size(); ++i)
    if (failures[i]) out.errors.push_back("seed " + std::to_string(config.seeds[i]) + ": " + *failures[i]);
  out.exit_code = out.errors.empty() ? 0 : 1;

  detail::write_text(out_dir / "report.json", report.dump(2) + "\n");

  std::ostringstream md;
  md << "# Feature selection run\n\n";
  md << "Model: " << to_string(config.model.kind) << ", U=" << config.engine.top_keep
     << ", V=" << config.engine.bottom_keep << ", E=" << config.engine.epochs << ", N=" << config.engine.folds
     << ", selection: " << to_string(config.engine.selection_mode) << "\n";
  for (const auto& s : sections) {
    md << "\n## Seed " << s["seed"].get<std::uint64_t>() << "\n\n";
    if (s.contains("error")) {
      md << "Failed: " << s["error"].get<std::string>() << "\n";
      continue;
    }
    md << "| Set | Features | Train (%) | Val (%) | Test (%) | Test rank | Val rank |\n";
    md << "|---|---|---|---|---|---|---|\n";
    std::size_t i = 0;
    for (const auto& c : s["pool"]) {
      md << "| ICES " << detail::ordinal(++i) << " | " << join(c["features"].get<std::vector<std::string>>(), ", ")
         << " | " << detail::fixed3(c["train_accuracy_pct"]) << " | " << detail::fixed3(c["val_accuracy_pct"]) << " | "
         << detail::fixed3(c["test_accuracy_pct"]) << " | "
         << (c.contains("test_rank") ? std::to_string(c["test_rank"].get<std::size_t>()) : "-") << " | "
         << (c.contains("val_rank") ? std::to_string(c["val_rank"].get<std::size_t>()) : "-") << " |\n";
    }
    md << "\nWinner: " << join(s["winner"]["features"].get<std::vector<std::string>>(), ", ") << "\n";
  }
  if (aggregate.contains("mean_test_rank")) {
    const std::size_t total = (std::size_t{1} << dataset.n_features()) - 1;
    md << "\n## Average Ranks (out of " << total << ")\n\n| Test rank | Val rank |\n|---|---|\n| "
       << detail::fixed3(aggregate["mean_test_rank"]) << " | " << detail::fixed3(aggregate["mean_val_rank"]) << " |\n";
  }
  detail::write_text(out_dir / "report.md", md.str());
  return out;
}

// Exhaustive ranking per seed; writes seed_*/ranktable.csv.
inline CommandResult cmd_rank(const RunConfig& config) {
  config.validate(false);
  const Dataset dataset = load_dataset(config);
  detail::refuse_oversized(dataset);
  if (dataset.n_features() > kOracleWarnFeatures)
    std::cerr << "warning: ranking " << ((std::size_t{1} << dataset.n_features()) - 1)
              << " subsets; this runs one cross-validation per subset\n";
  const fs::path out_dir(config.output_dir);
  CommandResult out;
  out.report["command"] = "rank";
  ordered_json seeds = ordered_json::array();
  for (std::uint64_t seed : config.seeds) {
    const PreparedSeed p = prepare_seed(config, dataset, seed);
    const Evaluator evaluator(p.train, p.model, p.folds);
    auto table = detail::build_rank_table(config, evaluator, p, out_dir / seed_dir_name(seed));
    seeds.push_back({{"seed", seed},
                     {"subsets", table->size()},
                     {"ranktable", seed_dir_name(seed) + "/ranktable.csv"}});
  }
  out.report["seeds"] = seeds;
  detail::write_text(out_dir / "rank_report.json", out.report.dump(2) + "\n");
  return out;
}

// The four classical selectors plus the ensemble strategy (the selector whose
// subset has the best validation accuracy). Writes baselines.json / .md.
inline CommandResult cmd_baselines(const RunConfig& config) {
  config.validate(false);
  const Dataset dataset = load_dataset(config);
  if (config.with_ranks) detail::refuse_oversized(dataset);
  const fs::path out_dir(config.output_dir);
  CommandResult out;
  ordered_json seeds = ordered_json::array();
  std::vector<std::string> labels;
  std::vector<double> test_rank_sum, val_rank_sum;
  std::size_t ranked_seeds = 0;
  for (std::uint64_t seed : config.seeds) {
    const PreparedSeed p = prepare_seed(config, dataset, seed);
    const Evaluator evaluator(p.train, p.model, p.folds);
    const auto names = p.train.feature_names;
    std::unique_ptr<RankTable> table;
    if (config.with_ranks) table = detail::build_rank_table(config, evaluator, p, out_dir / seed_dir_name(seed));
    const ModelSpec test_spec = holdout_spec(p.model);

    std::vector<std::pair<std::string, Candidate>> rows;
    for (auto& sel : classical_selections(p.train, seed, config.baseline_policy))
      rows.push_back({to_string(sel.method),
                      Candidate{sel.subset, evaluator.evaluate(sel.subset), Provenance::classical(to_string(sel.method))}});
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (ranks_before(rows[i].second, rows[best].second)) best = i;
    Candidate ensemble = rows[best].second;
    ensemble.provenance = Provenance::classical("ensemble(" + rows[best].first + ")");
    rows.push_back({"ensemble", ensemble});

    ordered_json section;
    section["seed"] = seed;
    ordered_json jrows = ordered_json::array();
    if (labels.empty()) {
      for (const auto& r : rows) labels.push_back(r.first);
      test_rank_sum.assign(rows.size(), 0.0);
      val_rank_sum.assign(rows.size(), 0.0);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& [label, c] = rows[i];
      ordered_json j;
      j["method"] = label;
      j.update(detail::subset_json(c.subset, names));
      j["train_accuracy_pct"] = rounded_percent(c.evaluation.train_accuracy);
      j["val_accuracy_pct"] = rounded_percent(c.evaluation.val_accuracy);
      j["test_accuracy_pct"] = rounded_percent(holdout_accuracy(p.train, p.test, c.subset, test_spec));
      if (label == "ensemble") j["chosen"] = rows[best].first;
      if (table) {
        auto [tr, vr] = table->rank_of(c.subset);
        j["test_rank"] = tr;
        j["val_rank"] = vr;
        test_rank_sum[i] += static_cast<double>(tr);
        val_rank_sum[i] += static_cast<double>(vr);
      }
      jrows.push_back(j);
    }
    if (table) ++ranked_seeds;
    section["rows"] = jrows;
    seeds.push_back(section);
  }
  out.report["command"] = "baselines";
  out.report["seeds"] = seeds;
  if (ranked_seeds) {
    ordered_json avg = ordered_json::array();
    for (std::size_t i = 0; i < labels.size(); ++i)
      avg.push_back({{"method", labels[i]},
                     {"mean_test_rank", test_rank_sum[i] / static_cast<double>(ranked_seeds)},
                     {"mean_val_rank", val_rank_sum[i] / static_cast<double>(ranked_seeds)}});
    out.report["average_ranks"] = avg;
  }
  detail::write_text(out_dir / "baselines.json", out.report.dump(2) + "\n");

  std::ostringstream md;
  md << "# Classical feature selection baselines\n";
  for (const auto& s : seeds) {
    md << "\n## Seed " << s["seed"].get<std::uint64_t>() << "\n\n";
    md << "| Method | Features | Train (%) | Val (%) | Test (%) | Test rank | Val rank |\n|---|---|---|---|---|---|---|\n";
    for (const auto& r : s["rows"])
      md << "| " << r["method"].get<std::string>() << " | "
         << join(r["features"].get<std::vector<std::string>>(), ", ") << " | " << detail::fixed3(r["train_accuracy_pct"])
         << " | " << detail::fixed3(r["val_accuracy_pct"]) << " | " << detail::fixed3(r["test_accuracy_pct"]) << " | "
         << (r.contains("test_rank") ? std::to_string(r["test_rank"].get<std::size_t>()) : "-") << " | "
         << (r.contains("val_rank") ? std::to_string(r["val_rank"].get<std::size_t>()) : "-") << " |\n";
  }
  if (out.report.contains("average_ranks")) {
    md << "\n## Average Ranks\n\n| Method | Test rank | Val rank |\n|---|---|---|\n";
    for (const auto& a : out.report["average_ranks"])
      md << "| " << a["method"].get<std::string>() << " | " << detail::fixed3(a["mean_test_rank"]) << " | "
         << detail::fixed3(a["mean_val_rank"]) << " |\n";
  }
  detail::write_text(out_dir / "baselines.md", md.str());
  return out;
}

// Re-runs `config` answering every operator call from the transcripts under
// `transcript_dir` (a previous run's output directory).
inline CommandResult cmd_replay(RunConfig config, const std::string& transcript_dir) {
  config.endpoint.reset();
  config.script_path.reset();
  return cmd_run(config, transcript_dir);
}

}  // namespace ice_search
