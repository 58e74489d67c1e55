#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "kmesn/clustering.hpp"
#include "kmesn/data.hpp"
#include "kmesn/hyperopt.hpp"
#include "kmesn/reservoir.hpp"

namespace kmesn::cli {

/// Feature scaling fitted on training frames.
struct Preprocessor {
  Preprocessing kind = Preprocessing::none;
  Standardizer standardizer;
  MinMaxScaler bounds;

  static Preprocessor fit(Preprocessing kind, const SequenceDataset& train);
  SequenceDataset apply(const SequenceDataset& ds) const;
  json to_json() const;
  static Preprocessor from_json(const json& j);
};

/// Training (and optionally test) data after preprocessing.
struct PreparedData {
  SequenceDataset train;
  std::optional<SequenceDataset> test;
  Preprocessor preprocessor;
  std::string train_hash;  ///< hex FNV-1a of the preprocessed training CSV
};

PreparedData prepare_data(const ExperimentConfig& cfg, bool need_test);
SequenceDataset load_test_like(const fs::path& path, TaskKind task);

/// Shape of a reservoir for `data` at `n_res` with the scalings of
/// `search_defaults` overlaid by the configured hyper-parameters.
HyperParams base_hyperparams(const ExperimentConfig& cfg, const SequenceDataset& data, std::size_t n_res);
/// Replaces the five scalings and the activation of `hp` with those of `from`.
HyperParams with_scalings(HyperParams hp, const HyperParams& from);

/// Centroid count for `model` at `n_res`; `pair` indexes k_list when set.
std::size_t resolve_k(const ExperimentConfig& cfg, ModelKind model, std::size_t n_res,
                      std::optional<std::size_t> pair = std::nullopt);

/// Mini-batch K-Means results keyed by (dataset hash, K, seed). Thread safe.
/// With a directory, results are also persisted as CSV and reused.
class CentroidCache {
 public:
  CentroidCache(const ExperimentConfig& cfg, std::optional<fs::path> dir);
  Centroids get(const PreparedData& data, std::size_t k, std::uint64_t seed);

 private:
  ClusterConfig base_;
  std::optional<fs::path> dir_;
  std::mutex mutex_;
  std::map<std::tuple<std::string, std::size_t, std::uint64_t>, Centroids> memo_;
};

struct ModelWeights {
  WeightSet weights;
  std::optional<Centroids> centroids;
  std::size_t k = 0;
};

ModelWeights build_weights(ModelKind model, const HyperParams& hp, std::size_t k, std::uint64_t seed,
                           const PreparedData& data, CentroidCache& cache);

Readout train_readout(const SequenceDataset& train, const WeightSet& w, const HyperParams& hp);

struct Evaluation {
  TaskKind task = TaskKind::frame_level;
  std::size_t outputs = 0;
  std::vector<DenseMatrix> y;  ///< per sequence readout outputs
  std::vector<std::size_t> predicted;
  std::vector<std::size_t> truth;
  double mse = 0.0;
  double error_rate = 0.0;  ///< FER for frame-level, CER for sequence-level
  std::vector<std::vector<std::uint64_t>> confusion;

  std::string metric_name() const { return task == TaskKind::frame_level ? "fer" : "cer"; }
};

Evaluation evaluate_model(const SequenceDataset& test, const WeightSet& w, const HyperParams& hp,
                          const Readout& readout);

/// Runs the configured search for `model` at cfg.optimize_n_res.
SearchTrace run_search(const ExperimentConfig& cfg, SearchProtocol protocol, ModelKind model,
                       const PreparedData& data, CentroidCache& cache);

/// Scalings for `model`: the best candidate of a search, or the configured
/// hyper-parameters when `protocol` is none.
std::pair<HyperParams, std::optional<SearchTrace>> resolve_scalings(const ExperimentConfig& cfg,
                                                                    SearchProtocol protocol, ModelKind model,
                                                                    const PreparedData& data,
                                                                    CentroidCache& cache);

}  // namespace kmesn::cli
