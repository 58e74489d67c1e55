#include "pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "kmesn/errors.hpp"
#include "kmesn/io.hpp"
#include "kmesn/km_init.hpp"

namespace kmesn::cli {

Preprocessor Preprocessor::fit(Preprocessing kind, const SequenceDataset& train) {
  Preprocessor p;
  p.kind = kind;
  if (kind == Preprocessing::standardize) p.standardizer = fit_standardizer(train);
  if (kind == Preprocessing::minmax) p.bounds = fit_minmax(train);
  return p;
}

SequenceDataset Preprocessor::apply(const SequenceDataset& ds) const {
  switch (kind) {
    case Preprocessing::standardize: return apply_standardizer(standardizer, ds);
    case Preprocessing::minmax: return minmax_rescale(ds, bounds);
    case Preprocessing::none: return ds;
  }
  return ds;
}

json Preprocessor::to_json() const {
  json j = {{"kind", std::string(cli::to_string(kind))}};
  if (kind == Preprocessing::standardize) {
    j["mean"] = standardizer.mean;
    j["scale"] = standardizer.scale;
  } else if (kind == Preprocessing::minmax) {
    j["min"] = bounds.min;
    j["max"] = bounds.max;
  }
  return j;
}

Preprocessor Preprocessor::from_json(const json& j) {
  try {
    Preprocessor p;
    p.kind = parse_preprocessing(j.at("kind").get<std::string>());
    if (p.kind == Preprocessing::standardize) {
      p.standardizer.mean = j.at("mean").get<std::vector<double>>();
      p.standardizer.scale = j.at("scale").get<std::vector<double>>();
    } else if (p.kind == Preprocessing::minmax) {
      p.bounds.min = j.at("min").get<std::vector<double>>();
      p.bounds.max = j.at("max").get<std::vector<double>>();
    }
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("preprocessing: ") + e.what());
  }
}

SequenceDataset load_test_like(const fs::path& path, TaskKind task) {
  if (!fs::exists(path)) throw ConfigError("dataset not found: " + path.string());
  return load_csv(path, task);
}

PreparedData prepare_data(const ExperimentConfig& cfg, bool need_test) {
  if (!cfg.train) throw ConfigError("a training dataset is required (--train)");
  if (!fs::exists(*cfg.train)) throw ConfigError("dataset not found: " + cfg.train->string());
  const SequenceDataset raw = load_csv(*cfg.train, cfg.task);
  raw.validate();

  PreparedData d;
  d.preprocessor = Preprocessor::fit(cfg.preprocessing, raw);
  d.train = d.preprocessor.apply(raw);
  std::ostringstream canonical;
  write_csv(canonical, d.train);
  d.train_hash = hex64(fnv1a(canonical.str()));

  if (need_test) {
    if (!cfg.test) throw ConfigError("a test dataset is required (--test)");
    SequenceDataset test = load_test_like(*cfg.test, raw.task);
    test.validate();
    if (test.input_dim() != raw.input_dim()) throw DimensionError("test and training feature counts differ");
    d.test = d.preprocessor.apply(test);
  }
  return d;
}

HyperParams base_hyperparams(const ExperimentConfig& cfg, const SequenceDataset& data, std::size_t n_res) {
  HyperParams structure;
  structure.reservoir_size = n_res;
  structure.input_dim = data.input_dim();
  structure.output_dim = data.n_classes;
  structure.input_fanin = std::min(cfg.input_fanin, structure.input_dim);
  structure.recurrent_fanin = std::min(cfg.recurrent_fanin, n_res);
  const HyperParams defaults = search_defaults(structure, data.task);
  return hyperparams_from_json(cfg.hyperparams.dump(), defaults);
}

HyperParams with_scalings(HyperParams hp, const HyperParams& from) {
  for (Param p : kSearchParams) set_param(hp, p, get_param(from, p));
  hp.activation = from.activation;
  return hp;
}

std::size_t resolve_k(const ExperimentConfig& cfg, ModelKind model, std::size_t n_res,
                      std::optional<std::size_t> pair) {
  switch (model) {
    case ModelKind::basic: return 0;
    case ModelKind::km_dense: return n_res;
    case ModelKind::km_sparse: {
      if (pair && !cfg.k_list.empty()) return cfg.k_list.at(*pair);
      return std::min(cfg.k.value_or(200), n_res);
    }
  }
  return 0;
}

CentroidCache::CentroidCache(const ExperimentConfig& cfg, std::optional<fs::path> dir)
    : base_(cfg.cluster), dir_(std::move(dir)) {}

Centroids CentroidCache::get(const PreparedData& data, std::size_t k, std::uint64_t seed) {
  const auto key = std::make_tuple(data.train_hash, k, seed);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  std::optional<fs::path> file;
  if (dir_) file = *dir_ / (data.train_hash + "_k" + std::to_string(k) + "_s" + std::to_string(seed) + ".csv");

  Centroids c;
  if (file && fs::exists(*file)) {
    std::ifstream in(*file);
    c = read_centroids_csv(in);
    if (c.k() != k || c.dim() != data.train.input_dim()) throw ParseError("stale centroid cache " + file->string());
  } else {
    ClusterConfig cc = base_;
    cc.k = k;
    cc.seed = seed;
    c = minibatch_kmeans(pooled_frames(data.train), cc);
    if (file) {
      fs::create_directories(file->parent_path());
      const fs::path tmp = file->string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary);
        write_centroids_csv(out, c);
      }
      fs::rename(tmp, *file);
    }
  }
  std::lock_guard lock(mutex_);
  return memo_.emplace(key, std::move(c)).first->second;
}

ModelWeights build_weights(ModelKind model, const HyperParams& hp, std::size_t k, std::uint64_t seed,
                           const PreparedData& data, CentroidCache& cache) {
  ModelWeights m;
  m.k = k;
  if (model == ModelKind::basic) {
    m.weights = init_random_weights(hp, seed);
    return m;
  }
  if (k == 0 || k > hp.reservoir_size) throw ConfigError("K must lie in [1, N_res] for K-Means models");
  m.centroids = cache.get(data, k, seed);
  m.weights = build_km_weightset({*m.centroids, hp.reservoir_size, false}, hp, seed);
  return m;
}

Readout train_readout(const SequenceDataset& train, const WeightSet& w, const HyperParams& hp) {
  const auto targets = one_hot_targets(train, hp.output_dim);
  ReadoutAccumulator acc(w.reservoir_size() + 1, hp.output_dim);
  for (std::size_t i = 0; i < train.sequences.size(); ++i)
    acc.accumulate(run_sequence(train.sequences[i].features, w, hp), targets[i]);
  return finalize(acc, hp.regularization);
}

Evaluation evaluate_model(const SequenceDataset& test, const WeightSet& w, const HyperParams& hp,
                          const Readout& readout) {
  if (test.empty()) throw EmptyDataset("test dataset has no sequences");
  if (test.input_dim() != w.input_dim()) throw DimensionError("test features do not match the model inputs");
  Evaluation e;
  e.task = test.task;
  e.outputs = readout.w_out.rows();
  const auto targets = one_hot_targets(test, e.outputs);
  double squared = 0.0;
  std::size_t entries = 0;
  for (std::size_t i = 0; i < test.sequences.size(); ++i) {
    const Sequence& s = test.sequences[i];
    DenseMatrix y = predict(run_sequence(s.features, w, hp), readout);
    const std::size_t n = y.values().size();
    squared += mse(y, targets[i]) * static_cast<double>(n);
    entries += n;
    if (e.task == TaskKind::frame_level) {
      const auto d = frame_decisions(y);
      e.predicted.insert(e.predicted.end(), d.begin(), d.end());
      e.truth.insert(e.truth.end(), s.labels.begin(), s.labels.end());
    } else {
      e.predicted.push_back(sequence_decision(y));
      e.truth.push_back(s.labels.front());
    }
    e.y.push_back(std::move(y));
  }
  e.mse = entries ? squared / static_cast<double>(entries) : 0.0;
  e.error_rate = e.task == TaskKind::frame_level ? fer(e.predicted, e.truth) : cer(e.predicted, e.truth);
  e.confusion = confusion_matrix(e.predicted, e.truth, e.outputs);
  return e;
}

SearchTrace run_search(const ExperimentConfig& cfg, SearchProtocol protocol, ModelKind model,
                       const PreparedData& data, CentroidCache& cache) {
  if (protocol == SearchProtocol::none) throw ConfigError("search protocol 'none' does not optimize");
  const std::size_t n_res = cfg.optimize_n_res;
  const HyperParams defaults = base_hyperparams(cfg, data.train, n_res);
  const ModelWeights mw = build_weights(model, defaults, resolve_k(cfg, model, n_res), cfg.seed, data, cache);
  const CandidateEvaluator evaluator(data.train, mw.weights,
                                     kfold_split(data.train.sequences.size(), {cfg.folds, cfg.seed}));
  const SearchOptions opts{cfg.seed, cfg.workers};
  if (protocol == SearchProtocol::sequential)
    return sequential_search(default_sequential_stages(cfg.bias_upper, cfg.input_scaling_low), defaults, evaluator,
                             opts);
  return joint_random_search(default_joint_space(cfg.input_scaling_low), cfg.joint_iterations, defaults, evaluator,
                             opts);
}

std::pair<HyperParams, std::optional<SearchTrace>> resolve_scalings(const ExperimentConfig& cfg,
                                                                    SearchProtocol protocol, ModelKind model,
                                                                    const PreparedData& data,
                                                                    CentroidCache& cache) {
  if (protocol == SearchProtocol::none) return {base_hyperparams(cfg, data.train, cfg.optimize_n_res), std::nullopt};
  SearchTrace trace = run_search(cfg, protocol, model, data, cache);
  const HyperParams best = trace.best_candidate().params;
  return {best, std::move(trace)};
}

}  // namespace kmesn::cli
