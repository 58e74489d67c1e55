#include "config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "kmesn/errors.hpp"

namespace kmesn::cli {

namespace {

const std::set<std::string> kScalingKeys = {"input_scaling", "spectral_radius", "leakage",
                                            "bias_scaling", "regularization", "activation"};

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

json filter_scalings(const json& j) {
  if (!j.is_object()) throw ConfigError("hyperparams must be a JSON object");
  json out = json::object();
  for (const auto& [key, value] : j.items()) {
    if (kScalingKeys.count(key)) out[key] = value;
  }
  return out;
}

json parse_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(ModelKind m) noexcept {
  switch (m) {
    case ModelKind::basic: return "basic";
    case ModelKind::km_dense: return "km_dense";
    case ModelKind::km_sparse: return "km_sparse";
  }
  return "?";
}

std::string_view to_string(Preprocessing p) noexcept {
  switch (p) {
    case Preprocessing::standardize: return "standardize";
    case Preprocessing::minmax: return "minmax";
    case Preprocessing::none: return "none";
  }
  return "?";
}

std::string_view to_string(SearchProtocol s) noexcept {
  switch (s) {
    case SearchProtocol::sequential: return "sequential";
    case SearchProtocol::joint: return "joint";
    case SearchProtocol::none: return "none";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind m : {ModelKind::basic, ModelKind::km_dense, ModelKind::km_sparse})
    if (name == to_string(m)) return m;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

Preprocessing parse_preprocessing(std::string_view name) {
  for (Preprocessing p : {Preprocessing::standardize, Preprocessing::minmax, Preprocessing::none})
    if (name == to_string(p)) return p;
  throw ConfigError("unknown preprocessing '" + std::string(name) + "'");
}

SearchProtocol parse_search_protocol(std::string_view name) {
  for (SearchProtocol s : {SearchProtocol::sequential, SearchProtocol::joint, SearchProtocol::none})
    if (name == to_string(s)) return s;
  throw ConfigError("unknown search protocol '" + std::string(name) + "'");
}

json ExperimentConfig::to_json() const {
  json j;
  j["train"] = train ? json(train->generic_string()) : json(nullptr);
  j["test"] = test ? json(test->generic_string()) : json(nullptr);
  j["task"] = task ? json(std::string(kmesn::to_string(*task))) : json(nullptr);
  j["preprocessing"] = std::string(cli::to_string(preprocessing));
  json m = json::array();
  for (ModelKind kind : models) m.push_back(std::string(cli::to_string(kind)));
  j["models"] = m;
  j["k"] = k ? json(*k) : json(nullptr);
  j["k_list"] = k_list;
  j["n_res_list"] = n_res_list;
  j["optimize_n_res"] = optimize_n_res;
  j["input_fanin"] = input_fanin;
  j["recurrent_fanin"] = recurrent_fanin;
  j["seed"] = seed;
  j["seeds"] = seeds;
  j["search"] = search ? json(std::string(cli::to_string(*search))) : json(nullptr);
  j["joint_iterations"] = joint_iterations;
  j["folds"] = folds;
  j["bias_upper"] = bias_upper;
  j["input_scaling_low"] = input_scaling_low;
  j["hyperparams"] = hyperparams;
  j["cluster"] = {{"batch_size", cluster.batch_size},
                  {"max_iterations", cluster.max_iterations},
                  {"reassign_threshold", cluster.reassign_threshold}};
  return j;
}

void ExperimentConfig::validate() const {
  if (models.empty()) throw ConfigError("at least one model kind is required");
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (n_res_list.empty()) throw ConfigError("n_res_list must be non-empty");
  for (std::size_t n : n_res_list)
    if (n == 0) throw ConfigError("reservoir sizes must be positive");
  if (optimize_n_res == 0) throw ConfigError("optimize_n_res must be positive");
  if (input_fanin == 0 || recurrent_fanin == 0) throw ConfigError("fan-in must be positive");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (joint_iterations == 0) throw ConfigError("joint_iterations must be positive");
  if (!(bias_upper >= 0.0)) throw ConfigError("bias_upper must be >= 0");
  if (!(input_scaling_low > 0.0 && input_scaling_low <= 1.0))
    throw ConfigError("input_scaling_low must lie in (0, 1]");
  if (workers == 0) throw ConfigError("workers must be positive");
  if (k && *k == 0) throw ConfigError("k must be positive");

  const bool sparse = std::find(models.begin(), models.end(), ModelKind::km_sparse) != models.end();
  if (sparse && !k_list.empty()) {
    if (k_list.size() != n_res_list.size())
      throw ConfigError("k_list must pair one K with every entry of n_res_list");
    for (std::size_t i = 0; i < k_list.size(); ++i)
      if (k_list[i] == 0 || k_list[i] > n_res_list[i])
        throw ConfigError("km_sparse needs 0 < K <= N_res for every pair");
  }
  ClusterConfig c = cluster;
  c.validate();
}

void merge_config(ExperimentConfig& cfg, const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const char* k = key.c_str();
    if (key == "train") {
      cfg.train = resolve(get<std::string>(j, k), base_dir);
    } else if (key == "test") {
      cfg.test = resolve(get<std::string>(j, k), base_dir);
    } else if (key == "task") {
      cfg.task = parse_task_kind(get<std::string>(j, k));
    } else if (key == "preprocessing") {
      cfg.preprocessing = parse_preprocessing(get<std::string>(j, k));
    } else if (key == "model") {
      cfg.models = {parse_model_kind(get<std::string>(j, k))};
    } else if (key == "models") {
      cfg.models.clear();
      for (const auto& name : get<std::vector<std::string>>(j, k)) cfg.models.push_back(parse_model_kind(name));
    } else if (key == "k") {
      cfg.k = get<std::size_t>(j, k);
    } else if (key == "k_list") {
      cfg.k_list = get<std::vector<std::size_t>>(j, k);
    } else if (key == "n_res") {
      cfg.n_res_list = {get<std::size_t>(j, k)};
    } else if (key == "n_res_list") {
      cfg.n_res_list = get<std::vector<std::size_t>>(j, k);
    } else if (key == "optimize_n_res") {
      cfg.optimize_n_res = get<std::size_t>(j, k);
    } else if (key == "input_fanin") {
      cfg.input_fanin = get<std::size_t>(j, k);
    } else if (key == "recurrent_fanin") {
      cfg.recurrent_fanin = get<std::size_t>(j, k);
    } else if (key == "seed") {
      cfg.seed = get<std::uint64_t>(j, k);
    } else if (key == "seeds") {
      cfg.seeds = get<std::vector<std::uint64_t>>(j, k);
    } else if (key == "search") {
      cfg.search = parse_search_protocol(get<std::string>(j, k));
    } else if (key == "joint_iterations") {
      cfg.joint_iterations = get<std::size_t>(j, k);
    } else if (key == "folds") {
      cfg.folds = get<std::size_t>(j, k);
    } else if (key == "bias_upper") {
      cfg.bias_upper = get<double>(j, k);
    } else if (key == "input_scaling_low") {
      cfg.input_scaling_low = get<double>(j, k);
    } else if (key == "hyperparams") {
      cfg.hyperparams = value.is_string() ? load_scalings(resolve(value.get<std::string>(), base_dir))
                                          : filter_scalings(value);
    } else if (key == "cluster") {
      if (!value.is_object()) throw ConfigError("cluster must be a JSON object");
      for (const auto& [ck, cv] : value.items()) {
        if (ck == "batch_size") cfg.cluster.batch_size = get<std::size_t>(value, "batch_size");
        else if (ck == "max_iterations") cfg.cluster.max_iterations = get<std::size_t>(value, "max_iterations");
        else if (ck == "reassign_threshold") cfg.cluster.reassign_threshold = get<double>(value, "reassign_threshold");
        else throw ConfigError("unknown cluster key '" + ck + "'");
      }
    } else if (key == "out") {
      cfg.out = resolve(get<std::string>(j, k), base_dir);
    } else if (key == "model_dir") {
      cfg.model_dir = resolve(get<std::string>(j, k), base_dir);
    } else if (key == "workers") {
      cfg.workers = get<std::size_t>(j, k);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

ExperimentConfig load_config(const fs::path& path) {
  ExperimentConfig cfg;
  merge_config(cfg, parse_file(path), path.parent_path());
  return cfg;
}

json load_scalings(const fs::path& path) {
  const json j = parse_file(path);
  if (j.is_object() && j.contains("hyperparams")) return filter_scalings(j.at("hyperparams"));
  return filter_scalings(j);
}

std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace kmesn::cli
