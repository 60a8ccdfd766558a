#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ice_search/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> data, target, output, script, endpoint_url, model_name, model_kind, mode, task;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::size_t> epochs, folds, threads;
  std::optional<double> test_fraction;
  bool with_ranks = false;
  bool parallel_seeds = false;
  bool no_smote = false;
};

void add_common(CLI::App& cmd, Overrides& o) {
  cmd.add_option("-c,--config", o.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  cmd.add_option("--data", o.data, "CSV dataset");
  cmd.add_option("--target", o.target, "target column");
  cmd.add_option("--task", o.task, "task description used in prompts");
  cmd.add_option("-o,--output", o.output, "output directory");
  cmd.add_option("--seeds", o.seeds, "seeds to run");
  cmd.add_option("--folds", o.folds, "cross-validation folds");
  cmd.add_option("--test-fraction", o.test_fraction, "held-out test fraction");
  cmd.add_option("--model", o.model_kind, "downstream model kind");
  cmd.add_option("--threads", o.threads, "worker threads for exhaustive ranking");
  cmd.add_flag("--with-ranks", o.with_ranks, "compute the exhaustive rank table");
  cmd.add_flag("--parallel-seeds", o.parallel_seeds, "run seeds concurrently");
  cmd.add_flag("--no-smote", o.no_smote, "skip SMOTE balancing of the training split");
}

void add_operator(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--script", o.script, "scripted-operator JSON file");
  cmd.add_option("--endpoint", o.endpoint_url, "chat-completion base URL");
  cmd.add_option("--lm-model", o.model_name, "model name sent to the endpoint");
  cmd.add_option("--epochs", o.epochs, "evolution epochs");
  cmd.add_option("--mode", o.mode, "argmax_val | decision_randomized | decision_randomized_excluding_first");
}

ice_search::RunConfig resolve(const Overrides& o) {
  auto c = ice_search::load_run_config(o.config_path);
  if (o.data) c.data_path = *o.data;
  if (o.target) c.target_column = *o.target;
  if (o.task) c.task_description = *o.task;
  if (o.output) c.output_dir = *o.output;
  if (o.seeds) c.seeds = *o.seeds;
  if (o.folds) c.engine.folds = *o.folds;
  if (o.test_fraction) c.test_fraction = *o.test_fraction;
  if (o.threads) c.threads = *o.threads;
  if (o.model_kind) {
    auto seed = c.model.seed;
    c.model = ice_search::ModelSpec::defaults(ice_search::model_kind_from_string(*o.model_kind));
    c.model.seed = seed;
  }
  if (o.with_ranks) c.with_ranks = true;
  if (o.parallel_seeds) c.parallel_seeds = true;
  if (o.no_smote) c.preprocess.smote = false;
  if (o.script) {
    c.script_path = *o.script;
    c.endpoint.reset();
  }
  if (o.endpoint_url) {
    if (!c.endpoint) c.endpoint.emplace();
    c.endpoint->base_url = *o.endpoint_url;
    c.script_path.reset();
  }
  if (o.model_name && c.endpoint) c.endpoint->model_name = *o.model_name;
  if (o.epochs) c.engine.epochs = *o.epochs;
  if (o.mode) c.engine.selection_mode = ice_search::selection_mode_from_string(*o.mode);
  return c;
}

int finish(const ice_search::CommandResult& r) {
  for (const auto& e : r.errors) std::cerr << "error: " << e << '\n';
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary feature selection with a language model as the variation operator"};
  app.require_subcommand(1);
  Overrides o;
  std::string transcript_dir;

  auto* run = app.add_subcommand("run", "evolve feature subsets and write report.json / report.md");
  add_common(*run, o);
  add_operator(*run, o);
  auto* rank = app.add_subcommand("rank", "rank every non-empty feature subset (ranktable.csv)");
  add_common(*rank, o);
  auto* baselines = app.add_subcommand("baselines", "score the four classical selectors and their ensemble");
  add_common(*baselines, o);
  auto* replay = app.add_subcommand("replay", "re-run from recorded transcripts");
  add_common(*replay, o);
  add_operator(*replay, o);
  replay->add_option("--transcripts", transcript_dir, "output directory of the recorded run")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    const auto config = resolve(o);
    if (run->parsed()) return finish(ice_search::cmd_run(config));
    if (rank->parsed()) return finish(ice_search::cmd_rank(config));
    if (baselines->parsed()) return finish(ice_search::cmd_baselines(config));
    if (replay->parsed()) return finish(ice_search::cmd_replay(config, transcript_dir));
  } catch (const ice_search::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
