#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "kmesn/errors.hpp"
#include "kmesn/io.hpp"
#include "kmesn/parallel.hpp"
#include "pipeline.hpp"

namespace kmesn::cli {

namespace {

const std::vector<std::size_t> kDefaultScanKs = {50, 100, 200, 400, 800};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json stats_json(const DatasetStats& s) {
  return {{"input_dim", s.input_dim}, {"sequences", s.sequences}, {"outputs", s.outputs},
          {"t_mean", s.t_mean},       {"t_min", s.t_min},         {"t_max", s.t_max},
          {"samples", s.samples},     {"task", std::string(to_string(s.task))}};
}

std::string config_hash(const ExperimentConfig& cfg) { return hex64(fnv1a(cfg.to_json().dump())); }

std::string format_metric(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

struct SweepCell {
  ModelKind model = ModelKind::basic;
  std::size_t pair = 0;
  std::size_t n_res = 0;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  bool ok = false;
  double value = 0.0;
  std::string error;
};

}  // namespace

int cmd_cluster_scan(const ExperimentConfig& cfg, std::ostream& out) {
  const PreparedData data = prepare_data(cfg, false);
  const std::vector<std::size_t> ks = cfg.k_list.empty() ? kDefaultScanKs : cfg.k_list;
  ClusterConfig base = cfg.cluster;
  base.seed = cfg.seed;
  const auto points = elbow_scan(pooled_frames(data.train), ks, base);

  std::ostringstream csv;
  write_elbow_csv(csv, points);
  write_file(cfg.out / "elbow.csv", csv.str());

  out << std::setw(8) << "k" << "  sse\n";
  for (const auto& p : points) out << std::setw(8) << p.k << "  " << format_double(p.sse) << '\n';
  return 0;
}

int cmd_optimize(const ExperimentConfig& cfg, std::ostream& out) {
  const SearchProtocol protocol = cfg.search.value_or(SearchProtocol::sequential);
  if (protocol == SearchProtocol::none) throw ConfigError("optimize needs a sequential or joint search");
  const PreparedData data = prepare_data(cfg, false);
  CentroidCache cache(cfg, cfg.out / "centroids");
  const SearchTrace trace = run_search(cfg, protocol, cfg.models.front(), data, cache);

  std::ostringstream csv;
  write_trace_csv(csv, trace);
  write_file(cfg.out / "trace.csv", csv.str());
  write_file(cfg.out / "best.json", trace_best_to_json(trace));

  const Candidate& best = trace.best_candidate();
  out << "evaluations: " << trace.candidates.size() << "\nbest index: " << trace.best
      << "\nbest mean MSE: " << format_double(best.mean_mse) << '\n';
  for (Param p : kSearchParams) out << "  " << to_string(p) << " = " << format_double(get_param(best.params, p)) << '\n';
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
  const PreparedData data = prepare_data(cfg, false);
  CentroidCache cache(cfg, cfg.out / "centroids");
  const ModelKind model = cfg.models.front();
  const std::size_t n_res = cfg.n_res_list.front();
  const SearchProtocol protocol = cfg.search.value_or(SearchProtocol::none);

  const auto [scalings, trace] = resolve_scalings(cfg, protocol, model, data, cache);
  const HyperParams hp = with_scalings(base_hyperparams(cfg, data.train, n_res), scalings);
  const std::optional<std::size_t> pair = cfg.k_list.empty() ? std::nullopt : std::optional<std::size_t>(0);
  const ModelWeights mw = build_weights(model, hp, resolve_k(cfg, model, n_res, pair), cfg.seed, data, cache);
  const Readout readout = train_readout(data.train, mw.weights, hp);

  const fs::path dir = cfg.out;
  write_file(dir / "weights.json", weights_to_json(mw.weights));
  write_file(dir / "readout.json", readout_to_json(readout));
  write_file(dir / "hyperparams.json", hyperparams_to_json(hp));
  write_file(dir / "preprocessing.json", data.preprocessor.to_json().dump(2) + "\n");
  if (mw.centroids) {
    std::ostringstream c;
    write_centroids_csv(c, *mw.centroids);
    write_file(dir / "centroids.csv", c.str());
  }
  if (trace) write_file(dir / "best.json", trace_best_to_json(*trace));

  json manifest = {{"model", std::string(to_string(model))},
                   {"input_init", std::string(to_string(mw.weights.input_init))},
                   {"k", mw.k},
                   {"n_res", n_res},
                   {"seed", cfg.seed},
                   {"task", std::string(to_string(data.train.task))},
                   {"outputs", hp.output_dim},
                   {"search", std::string(to_string(protocol))},
                   {"config_hash", config_hash(cfg)},
                   {"train_hash", data.train_hash},
                   {"train_stats", stats_json(describe(data.train))}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  out << "trained " << to_string(model) << " (" << to_string(mw.weights.input_init) << "), N_res=" << n_res;
  if (mw.k) out << ", K=" << mw.k;
  out << ", seed=" << cfg.seed << "\nmodel written to " << dir.string() << '\n';
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out) {
  const fs::path dir = cfg.model_dir.value_or(cfg.out);
  if (!cfg.test) throw ConfigError("a test dataset is required (--test)");
  const json manifest = read_json_file(dir / "manifest.json");
  TaskKind task;
  try {
    task = parse_task_kind(manifest.at("task").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  const Preprocessor pre = Preprocessor::from_json(read_json_file(dir / "preprocessing.json"));
  const WeightSet w = weights_from_json(read_file(dir / "weights.json"));
  const Readout readout = readout_from_json(read_file(dir / "readout.json"));
  const HyperParams hp = hyperparams_from_json(read_file(dir / "hyperparams.json"));

  SequenceDataset test = load_test_like(*cfg.test, task);
  test.validate();
  if (test.input_dim() != w.input_dim()) throw DimensionError("test features do not match the model inputs");
  test = pre.apply(test);
  const Evaluation e = evaluate_model(test, w, hp, readout);

  json metrics = {{"task", std::string(to_string(e.task))},
                  {"sequences", test.sequences.size()},
                  {"frames", test.frame_count()},
                  {"outputs", e.outputs},
                  {"mse", e.mse},
                  {e.metric_name(), e.error_rate},
                  {"confusion", e.confusion}};
  write_file(cfg.out / "metrics.json", metrics.dump(2) + "\n");

  std::ostringstream pred, outs;
  pred << (e.task == TaskKind::frame_level ? "seq,t,predicted,label\n" : "seq,predicted,label\n");
  outs << "seq,t";
  for (std::size_t j = 0; j < e.outputs; ++j) outs << ",y" << j;
  outs << '\n';
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < test.sequences.size(); ++i) {
    const auto id = test.sequences[i].id;
    const DenseMatrix& y = e.y[i];
    for (std::size_t t = 0; t < y.rows(); ++t) {
      outs << id << ',' << t;
      for (double v : y.row(t)) outs << ',' << format_double(v);
      outs << '\n';
      if (e.task == TaskKind::frame_level) {
        pred << id << ',' << t << ',' << e.predicted[cursor] << ',' << e.truth[cursor] << '\n';
        ++cursor;
      }
    }
    if (e.task == TaskKind::sequence_level) pred << id << ',' << e.predicted[i] << ',' << e.truth[i] << '\n';
  }
  write_file(cfg.out / "predictions.csv", pred.str());
  write_file(cfg.out / "outputs.csv", outs.str());

  out << "mse: " << format_double(e.mse) << '\n' << e.metric_name() << ": " << format_double(e.error_rate) << '\n';
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const SearchProtocol protocol = cfg.search.value_or(SearchProtocol::sequential);
  const PreparedData data = prepare_data(cfg, true);
  CentroidCache cache(cfg, cfg.out / "centroids");

  json chosen = json::object();
  std::vector<HyperParams> scalings;
  for (ModelKind model : cfg.models) {
    auto [hp, trace] = resolve_scalings(cfg, protocol, model, data, cache);
    scalings.push_back(hp);
    chosen[std::string(to_string(model))] = json::parse(hyperparams_to_json(hp));
    if (trace) {
      std::ostringstream csv;
      write_trace_csv(csv, *trace);
      write_file(cfg.out / ("trace_" + std::string(to_string(model)) + ".csv"), csv.str());
    }
  }
  write_file(cfg.out / "sweep_hyperparams.json", chosen.dump(2) + "\n");

  std::vector<SweepCell> cells;
  std::vector<std::size_t> model_index;
  for (std::size_t m = 0; m < cfg.models.size(); ++m)
    for (std::size_t i = 0; i < cfg.n_res_list.size(); ++i)
      for (std::uint64_t seed : cfg.seeds) {
        SweepCell c;
        c.model = cfg.models[m];
        c.pair = i;
        c.n_res = cfg.n_res_list[i];
        c.seed = seed;
        c.k = resolve_k(cfg, c.model, c.n_res, i);
        cells.push_back(c);
        model_index.push_back(m);
      }

  // cluster every distinct (K, seed) once before the cells run
  std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
  {
    std::set<std::pair<std::size_t, std::uint64_t>> seen;
    for (const auto& c : cells)
      if (c.model != ModelKind::basic && c.k > 0 && c.k <= c.n_res && seen.emplace(c.k, c.seed).second)
        jobs.emplace_back(c.k, c.seed);
  }
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
    try {
      cache.get(data, jobs[j].first, jobs[j].second);
    } catch (const Error&) {
      // the owning cells report the failure
    }
  });

  parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
    SweepCell& c = cells[i];
    try {
      const HyperParams hp = with_scalings(base_hyperparams(cfg, data.train, c.n_res), scalings[model_index[i]]);
      const ModelWeights mw = build_weights(c.model, hp, c.k, c.seed, data, cache);
      const Readout readout = train_readout(data.train, mw.weights, hp);
      c.value = evaluate_model(*data.test, mw.weights, hp, readout).error_rate;
      c.ok = true;
    } catch (const Error& e) {
      c.error = e.what();
    }
  });

  const std::string metric = data.train.task == TaskKind::frame_level ? "fer" : "cer";
  std::ostringstream csv;
  csv << "model,K,n_res,seed,metric,value,min,max,status\n";
  std::size_t failures = 0;
  for (std::size_t start = 0; start < cells.size(); start += cfg.seeds.size()) {
    double sum = 0.0, lo = INFINITY, hi = -INFINITY;
    std::size_t ok = 0;
    for (std::size_t i = start; i < start + cfg.seeds.size(); ++i) {
      const SweepCell& c = cells[i];
      const std::string k = c.model == ModelKind::basic ? "" : std::to_string(c.k);
      csv << to_string(c.model) << ',' << k << ',' << c.n_res << ',' << c.seed << ',' << metric << ','
          << (c.ok ? format_metric(c.value) : "") << ",,," << (c.ok ? "ok" : "failed") << '\n';
      if (c.ok) {
        sum += c.value;
        lo = std::min(lo, c.value);
        hi = std::max(hi, c.value);
        ++ok;
      } else {
        ++failures;
        err << "cell " << to_string(c.model) << " n_res=" << c.n_res << " seed=" << c.seed << " failed: " << c.error
            << '\n';
      }
    }
    const SweepCell& c = cells[start];
    const std::string k = c.model == ModelKind::basic ? "" : std::to_string(c.k);
    csv << to_string(c.model) << ',' << k << ',' << c.n_res << ",all," << metric << ','
        << (ok ? format_metric(sum / static_cast<double>(ok)) : "") << ',' << (ok ? format_metric(lo) : "") << ','
        << (ok ? format_metric(hi) : "") << ",summary\n";
    out << std::left << std::setw(10) << to_string(c.model) << " N_res=" << std::setw(5) << c.n_res << ' ' << metric
        << " mean=" << (ok ? format_metric(sum / static_cast<double>(ok)) : "n/a") << " (" << ok << '/'
        << cfg.seeds.size() << " ok)\n"
        << std::right;
  }
  write_file(cfg.out / "sweep.csv", csv.str());
  out << "results written to " << (cfg.out / "sweep.csv").string() << '\n';
  if (failures) out << failures << " cell(s) failed\n";
  return 0;
}

int cmd_describe(const ExperimentConfig& cfg, std::ostream& out) {
  if (!cfg.train) throw ConfigError("a dataset is required (--train)");
  if (!fs::exists(*cfg.train)) throw ConfigError("dataset not found: " + cfg.train->string());
  const SequenceDataset train = load_csv(*cfg.train, cfg.task);
  train.validate();
  json j = {{"train", stats_json(describe(train))}};
  if (cfg.test) {
    const SequenceDataset test = load_test_like(*cfg.test, train.task);
    test.validate();
    j["test"] = stats_json(describe(test));
  }
  out << j.dump(2) << '\n';
  return 0;
}

}  // namespace kmesn::cli
