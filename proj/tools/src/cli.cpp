#include "kmesn/cli/cli.hpp"

#include <algorithm>
#include <functional>
#include <ostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "kmesn/errors.hpp"

namespace kmesn::cli {

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string task;

  std::string train, test, preprocess, model, search, hyperparams, model_dir;
  std::vector<std::string> models;
  std::size_t k = 0, n_res = 0, iterations = 0, folds = 0;
  std::vector<std::size_t> k_list, n_res_list;
  std::vector<std::uint64_t> seeds;
};

void add_experiment_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--train", f.train, "training dataset CSV");
  sub.add_option("--test", f.test, "test dataset CSV");
  sub.add_option("--preprocess", f.preprocess, "standardize | minmax | none");
  sub.add_option("--model", f.model, "basic | km_dense | km_sparse");
  sub.add_option("--models", f.models, "model kinds for a sweep");
  sub.add_option("--k", f.k, "centroid count cap for km_sparse");
  sub.add_option("--k-list", f.k_list, "K values (scan list, or one per --n-res-list entry)");
  sub.add_option("--n-res", f.n_res, "reservoir size");
  sub.add_option("--n-res-list", f.n_res_list, "reservoir sizes for a sweep");
  sub.add_option("--seeds", f.seeds, "initialization seeds for a sweep");
  sub.add_option("--search", f.search, "sequential | joint | none");
  sub.add_option("--iterations", f.iterations, "joint search draws");
  sub.add_option("--folds", f.folds, "cross-validation folds");
  sub.add_option("--hyperparams", f.hyperparams, "hyper-parameter JSON (e.g. best.json)");
  sub.add_option("--model-dir", f.model_dir, "directory of a trained model");
}

ExperimentConfig build_config(const CLI::App& app, const CLI::App& sub, const Flags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  auto given = [&](const char* name) {
    for (const CLI::App* a : {&app, &sub})
      if (const CLI::Option* o = a->get_option_no_throw(name); o && o->count() > 0) return true;
    return false;
  };
  if (given("--out")) cfg.out = f.out;
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--workers")) cfg.workers = f.workers;
  if (given("--task")) cfg.task = parse_task_kind(f.task);
  if (given("--train")) cfg.train = f.train;
  if (given("--test")) cfg.test = f.test;
  if (given("--preprocess")) cfg.preprocessing = parse_preprocessing(f.preprocess);
  if (given("--model")) cfg.models = {parse_model_kind(f.model)};
  if (given("--models")) {
    cfg.models.clear();
    for (const auto& m : f.models) cfg.models.push_back(parse_model_kind(m));
  }
  if (given("--k")) cfg.k = f.k;
  if (given("--k-list")) cfg.k_list = f.k_list;
  if (given("--n-res")) {
    cfg.n_res_list = {f.n_res};
    cfg.optimize_n_res = f.n_res;
  }
  if (given("--n-res-list")) cfg.n_res_list = f.n_res_list;
  if (given("--seeds")) cfg.seeds = f.seeds;
  if (given("--search")) cfg.search = parse_search_protocol(f.search);
  if (given("--iterations")) cfg.joint_iterations = f.iterations;
  if (given("--folds")) cfg.folds = f.folds;
  if (given("--hyperparams")) cfg.hyperparams = load_scalings(f.hyperparams);
  if (given("--model-dir")) cfg.model_dir = f.model_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Echo state networks with random or K-Means input weights", "kmesn"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON experiment config");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--seed", f.seed, "seed for weights, clustering, folds and search");
  app.add_option("--workers", f.workers, "worker threads");
  app.add_option("--task", f.task, "frame | sequence");

  using Command = std::function<int(const ExperimentConfig&)>;
  std::vector<std::pair<CLI::App*, Command>> commands;
  auto add = [&](const char* name, const char* help, Command run) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_experiment_flags(*sub, f);
    commands.emplace_back(sub, std::move(run));
  };
  add("cluster-scan", "SSE of mini-batch K-Means over a list of K",
      [&](const ExperimentConfig& c) { return cmd_cluster_scan(c, out); });
  add("optimize", "cross-validated hyper-parameter search",
      [&](const ExperimentConfig& c) { return cmd_optimize(c, out); });
  add("train", "train one model and write its files", [&](const ExperimentConfig& c) { return cmd_train(c, out); });
  add("evaluate", "score a trained model on a test set",
      [&](const ExperimentConfig& c) { return cmd_evaluate(c, out); });
  add("sweep", "model x reservoir size x seed comparison",
      [&](const ExperimentConfig& c) { return cmd_sweep(c, out, err); });
  add("describe", "dataset statistics", [&](const ExperimentConfig& c) { return cmd_describe(c, out); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (auto& [sub, run] : commands) {
    if (!sub->parsed()) continue;
    try {
      return run(build_config(app, *sub, f));
    } catch (const SingularSystem& e) {
      err << "numeric failure: " << e.what() << '\n';
      return kExitNumeric;
    } catch (const DegenerateSpectrum& e) {
      err << "numeric failure: " << e.what() << '\n';
      return kExitNumeric;
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
      err << "error: " << e.what() << '\n';
      return kExitConfig;
    }
  }
  return kExitConfig;
}

}  // namespace kmesn::cli
