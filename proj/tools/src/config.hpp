#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kmesn/clustering.hpp"
#include "kmesn/data.hpp"

namespace kmesn::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class ModelKind { basic, km_dense, km_sparse };
enum class Preprocessing { standardize, minmax, none };
enum class SearchProtocol { sequential, joint, none };

std::string_view to_string(ModelKind m) noexcept;
std::string_view to_string(Preprocessing p) noexcept;
std::string_view to_string(SearchProtocol s) noexcept;
ModelKind parse_model_kind(std::string_view name);
Preprocessing parse_preprocessing(std::string_view name);
SearchProtocol parse_search_protocol(std::string_view name);

struct ExperimentConfig {
  std::optional<fs::path> train;
  std::optional<fs::path> test;
  std::optional<TaskKind> task;
  Preprocessing preprocessing = Preprocessing::standardize;

  std::vector<ModelKind> models{ModelKind::basic};
  std::optional<std::size_t> k;   ///< centroid count cap for km_sparse
  std::vector<std::size_t> k_list;
  std::vector<std::size_t> n_res_list{50};
  std::size_t optimize_n_res = 50;
  std::size_t input_fanin = 10;
  std::size_t recurrent_fanin = 10;

  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds{0};

  std::optional<SearchProtocol> search;
  std::size_t joint_iterations = 2000;
  std::size_t folds = 5;
  double bias_upper = 2.0;
  double input_scaling_low = 1e-3;
  json hyperparams = json::object();  ///< partial scalings applied over the search defaults

  ClusterConfig cluster;  ///< k and seed are set per run

  fs::path out = "kmesn_out";
  std::optional<fs::path> model_dir;
  std::size_t workers = 1;

  /// Canonical JSON form; excludes run-location settings (out, workers).
  json to_json() const;
  void validate() const;
};

/// Reads a JSON config file. Relative paths inside it resolve against the
/// file's directory. Unknown keys raise ConfigError.
ExperimentConfig load_config(const fs::path& path);
/// Applies the keys of `j` on top of `cfg`.
void merge_config(ExperimentConfig& cfg, const json& j, const fs::path& base_dir);

/// Reads a hyper-parameter document: either a bare object or one holding a
/// "hyperparams" member (as written by `optimize`). Only the searchable
/// scalings and the activation are kept.
json load_scalings(const fs::path& path);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace kmesn::cli
