#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "kmesn/cli/cli.hpp"
#include "kmesn/data.hpp"
#include "kmesn/io.hpp"
#include "kmesn/synthetic.hpp"

using namespace kmesn;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("kmesn_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(f, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

struct TaskFiles {
  fs::path train, test;
};

TaskFiles markov_files(const fs::path& dir, std::size_t train = 40, std::size_t test = 40) {
  MarkovTaskConfig c;
  c.train_sequences = train;
  c.test_sequences = test;
  c.length = 12;
  c.seed = 3;
  const auto split = make_markov_task(c);
  fs::create_directories(dir);
  TaskFiles f{dir / "train.csv", dir / "test.csv"};
  save_csv(f.train, split.train);
  save_csv(f.test, split.test);
  return f;
}

// frame-level task whose label is readable from the current frame alone
fs::path separable_frames(const fs::path& dir, std::size_t sequences = 6) {
  SequenceDataset ds;
  ds.task = TaskKind::frame_level;
  ds.n_classes = 3;
  for (std::size_t s = 0; s < sequences; ++s) {
    DenseMatrix f(20, 3);
    std::vector<std::size_t> labels(20);
    for (std::size_t t = 0; t < 20; ++t) {
      labels[t] = (s + t * 7) % 3;
      for (std::size_t j = 0; j < 3; ++j) f(t, j) = (j == labels[t] ? 4.0 : 0.0) + 0.01 * static_cast<double>((s * 31 + t * 17 + j) % 5);
    }
    ds.sequences.push_back({static_cast<std::int64_t>(s), f, labels});
  }
  const fs::path p = dir / "frames.csv";
  save_csv(p, ds);
  return p;
}

fs::path blob_frames(const fs::path& dir) {
  BlobConfig b;
  b.clusters = 3;
  b.points = 1200;
  b.sigma = 0.1;
  b.seed = 4;
  const Blobs blobs = make_blobs(b);
  SequenceDataset ds;
  ds.task = TaskKind::frame_level;
  ds.n_classes = 3;
  ds.sequences.push_back({0, blobs.points, blobs.labels});
  const fs::path p = dir / "blobs.csv";
  save_csv(p, ds);
  return p;
}

}  // namespace

TEST_CASE("exit codes for bad invocations") {
  const fs::path dir = scratch("codes");
  CHECK(run({}).code == cli::kExitConfig);
  CHECK(run({"frobnicate"}).code == cli::kExitConfig);
  CHECK(run({"describe", "--no-such-flag"}).code == cli::kExitConfig);
  CHECK(run({"--help"}).code == cli::kExitOk);
  CHECK(run({"describe", "--train", (dir / "missing.csv").string()}).code == cli::kExitConfig);

  std::ofstream(dir / "bad.json") << R"({"train": "x.csv", "colour": "blue"})";
  const Result r = run({"--config", (dir / "bad.json").string(), "describe"});
  CHECK(r.code == cli::kExitConfig);
  CHECK(r.err.find("colour") != std::string::npos);

  std::ofstream(dir / "broken.csv") << "seq,t,f0,label\n0,0,abc,1\n";
  CHECK(run({"describe", "--train", (dir / "broken.csv").string()}).code == cli::kExitConfig);
  CHECK(run({"sweep", "--seeds"}).code == cli::kExitConfig);
}

TEST_CASE("describe") {
  const fs::path dir = scratch("describe");
  const TaskFiles f = markov_files(dir);
  const Result r = run({"describe", "--train", f.train.string(), "--test", f.test.string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["train"]["sequences"] == 40);
  CHECK(j["train"]["input_dim"] == 20);
  CHECK(j["train"]["task"] == "sequence_level");
  CHECK(j["test"]["samples"] == 40 * 12);
}

TEST_CASE("cluster-scan") {
  const fs::path dir = scratch("scan");
  const fs::path data = blob_frames(dir);
  const std::vector<std::string> args = {"cluster-scan", "--train", data.string(), "--preprocess", "none",
                                         "--k-list", "50", "100", "200", "400", "800"};
  auto with_out = [&](const std::string& out) {
    auto a = args;
    a.insert(a.end(), {"--out", (dir / out).string()});
    return a;
  };
  REQUIRE(run(with_out("a")).code == 0);
  const auto rows = read_rows(dir / "a" / "elbow.csv");
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == std::vector<std::string>{"k", "sse"});
  for (std::size_t i = 2; i < rows.size(); ++i) CHECK(std::stod(rows[i][1]) <= 1.05 * std::stod(rows[i - 1][1]));

  REQUIRE(run(with_out("b")).code == 0);
  CHECK(slurp(dir / "a" / "elbow.csv") == slurp(dir / "b" / "elbow.csv"));

  CHECK(run({"cluster-scan", "--train", data.string(), "--k-list", "5000", "--out", (dir / "c").string()}).code ==
        cli::kExitConfig);
}

TEST_CASE("optimize") {
  const fs::path dir = scratch("optimize");
  const TaskFiles f = markov_files(dir, 30, 5);

  SUBCASE("sequential default protocol") {
    REQUIRE(run({"optimize", "--train", f.train.string(), "--out", (dir / "seq").string(), "--n-res", "20"}).code == 0);
    const auto rows = read_rows(dir / "seq" / "trace.csv");
    REQUIRE(rows.size() == 322);
    const std::size_t mean_col = rows[0].size() - 1;
    CHECK(rows[0][mean_col] == "mean_mse");
    double lo = INFINITY;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double v = std::stod(rows[i][mean_col]);
      if (v < lo) {
        lo = v;
        arg = i - 1;
      }
    }
    const json best = json::parse(slurp(dir / "seq" / "best.json"));
    CHECK(best["index"] == arg);
    CHECK(best["mean_mse"].get<double>() == lo);
    CHECK(best["evaluations"] == 321);
  }
  SUBCASE("joint smoke run") {
    REQUIRE(run({"optimize", "--train", f.train.string(), "--search", "joint", "--iterations", "10", "--out",
                 (dir / "joint").string(), "--n-res", "20"})
                .code == 0);
    CHECK(read_rows(dir / "joint" / "trace.csv").size() == 11);
  }
  SUBCASE("none is not a search") {
    CHECK(run({"optimize", "--train", f.train.string(), "--search", "none", "--out", (dir / "x").string()}).code ==
          cli::kExitConfig);
  }
}

TEST_CASE("train and evaluate") {
  const fs::path dir = scratch("train");
  const TaskFiles f = markov_files(dir);

  SUBCASE("basic model loads and predicts") {
    const fs::path m = dir / "basic";
    REQUIRE(run({"train", "--train", f.train.string(), "--n-res", "50", "--out", m.string()}).code == 0);
    for (const char* file : {"weights.json", "readout.json", "hyperparams.json", "preprocessing.json", "manifest.json"})
      CHECK(fs::exists(m / file));
    CHECK_FALSE(fs::exists(m / "centroids.csv"));
    CHECK(weights_from_json(slurp(m / "weights.json")).reservoir_size() == 50);
    const Result e = run({"evaluate", "--test", f.test.string(), "--model-dir", m.string(), "--out", (dir / "eval").string()});
    REQUIRE(e.code == 0);
    const json metrics = json::parse(slurp(dir / "eval" / "metrics.json"));
    CHECK(metrics.contains("cer"));
    CHECK(metrics["sequences"] == 40);
  }
  SUBCASE("km_dense with K = N_res") {
    const fs::path m = dir / "km";
    REQUIRE(run({"train", "--train", f.train.string(), "--model", "km_dense", "--n-res", "30", "--out", m.string()})
                .code == 0);
    const json manifest = json::parse(slurp(m / "manifest.json"));
    CHECK(manifest["input_init"] == "kmeans_dense");
    CHECK(manifest["k"] == 30);
    std::ifstream c(m / "centroids.csv");
    CHECK(read_centroids_csv(c).k() == 30);
  }
  SUBCASE("km_sparse pads the reservoir") {
    const fs::path m = dir / "kms";
    REQUIRE(run({"train", "--train", f.train.string(), "--model", "km_sparse", "--n-res", "40", "--k", "10", "--out",
                 m.string()})
                .code == 0);
    CHECK(json::parse(slurp(m / "manifest.json"))["input_init"] == "kmeans_sparse");
  }
  SUBCASE("retraining with the same seed is byte identical") {
    const std::vector<std::string> base = {"--seed", "7", "train", "--train", f.train.string(), "--model", "km_dense",
                                           "--n-res", "20"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out", (dir / "r1").string()});
    b.insert(b.end(), {"--out", (dir / "r2").string()});
    REQUIRE(run(a).code == 0);
    REQUIRE(run(b).code == 0);
    for (const char* file : {"weights.json", "readout.json", "hyperparams.json", "preprocessing.json", "manifest.json",
                             "centroids.csv"})
      CHECK(slurp(dir / "r1" / file) == slurp(dir / "r2" / file));
  }
  SUBCASE("numeric failure exits with 3") {
    std::ofstream(dir / "zero.json") << R"({"regularization": 0, "input_scaling": 0, "bias_scaling": 0})";
    CHECK(run({"train", "--train", f.train.string(), "--hyperparams", (dir / "zero.json").string(), "--out",
               (dir / "z").string()})
              .code == cli::kExitNumeric);
  }
  SUBCASE("evaluation errors") {
    const fs::path m = dir / "m";
    REQUIRE(run({"train", "--train", f.train.string(), "--n-res", "10", "--out", m.string()}).code == 0);
    std::ofstream(dir / "empty.csv") << "seq,t,f0,label\n";
    CHECK(run({"evaluate", "--test", (dir / "empty.csv").string(), "--model-dir", m.string(), "--out",
               (dir / "e").string()})
              .code == cli::kExitConfig);
    const fs::path narrow = separable_frames(dir);
    CHECK(run({"evaluate", "--test", narrow.string(), "--model-dir", m.string(), "--out", (dir / "e").string()}).code ==
          cli::kExitConfig);
    CHECK(run({"evaluate", "--test", f.test.string(), "--model-dir", (dir / "nothing").string()}).code ==
          cli::kExitConfig);
  }
}

TEST_CASE("evaluate on a memorizable frame task") {
  const fs::path dir = scratch("memo");
  const fs::path data = separable_frames(dir);
  std::ofstream(dir / "hp.json") << R"({"leakage": 1, "spectral_radius": 0, "regularization": 1e-8})";
  REQUIRE(run({"train", "--train", data.string(), "--n-res", "30", "--hyperparams", (dir / "hp.json").string(),
               "--out", (dir / "m").string()})
              .code == 0);
  REQUIRE(run({"evaluate", "--test", data.string(), "--model-dir", (dir / "m").string(), "--out",
               (dir / "e").string()})
              .code == 0);
  const json metrics = json::parse(slurp(dir / "e" / "metrics.json"));
  CHECK(metrics["fer"] == 0.0);

  // recompute the metrics from the saved outputs
  const SequenceDataset truth = load_csv(data);
  const auto targets = one_hot_targets(truth);
  const auto rows = read_rows(dir / "e" / "outputs.csv");
  REQUIRE(rows.size() == 1 + truth.frame_count());
  std::size_t r = 1;
  double squared = 0.0;
  std::size_t entries = 0;
  std::vector<std::size_t> predicted, labels;
  for (std::size_t s = 0; s < truth.sequences.size(); ++s) {
    DenseMatrix y(truth.sequences[s].length(), 3);
    for (std::size_t t = 0; t < y.rows(); ++t, ++r) {
      CHECK(std::stoll(rows[r][0]) == truth.sequences[s].id);
      for (std::size_t j = 0; j < 3; ++j) y(t, j) = std::stod(rows[r][2 + j]);
    }
    squared += mse(y, targets[s]) * static_cast<double>(y.values().size());
    entries += y.values().size();
    const auto d = frame_decisions(y);
    predicted.insert(predicted.end(), d.begin(), d.end());
    labels.insert(labels.end(), truth.sequences[s].labels.begin(), truth.sequences[s].labels.end());
  }
  CHECK(metrics["mse"].get<double>() == doctest::Approx(squared / static_cast<double>(entries)).epsilon(1e-12));
  CHECK(metrics["fer"].get<double>() == fer(predicted, labels));
  const auto confusion = confusion_matrix(predicted, labels, 3);
  CHECK(metrics["confusion"] == json(confusion));

  const auto pred_rows = read_rows(dir / "e" / "predictions.csv");
  CHECK(pred_rows[0] == std::vector<std::string>{"seq", "t", "predicted", "label"});
  for (std::size_t i = 1; i < pred_rows.size(); ++i) CHECK(pred_rows[i][2] == pred_rows[i][3]);
}

TEST_CASE("sweep") {
  const fs::path dir = scratch("sweep");
  const TaskFiles f = markov_files(dir, 30, 20);
  auto sweep = [&](const std::string& out, std::vector<std::string> extra) {
    std::vector<std::string> a = {"sweep", "--train", f.train.string(), "--test", f.test.string(), "--search", "none",
                                  "--out", (dir / out).string()};
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };

  SUBCASE("row counts and summary consistency") {
    REQUIRE(sweep("a", {"--models", "basic", "km_dense", "--n-res-list", "10", "20", "--seeds", "0", "1", "2"}).code ==
            0);
    const auto rows = read_rows(dir / "a" / "sweep.csv");
    REQUIRE(rows.size() == 1 + 12 + 4);
    CHECK(rows[0] == std::vector<std::string>{"model", "K", "n_res", "seed", "metric", "value", "min", "max", "status"});
    std::map<std::string, std::vector<double>> groups;
    std::size_t details = 0, summaries = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& row = rows[i];
      const std::string key = row[0] + "/" + row[2];
      if (row[8] == "ok") {
        groups[key].push_back(std::stod(row[5]));
        ++details;
        CHECK(row[4] == "cer");
      } else {
        REQUIRE(row[8] == "summary");
        CHECK(row[3] == "all");
        const auto& v = groups.at(key);
        REQUIRE(v.size() == 3);
        CHECK(std::stod(row[5]) == doctest::Approx((v[0] + v[1] + v[2]) / 3.0).epsilon(1e-15));
        CHECK(std::stod(row[6]) == std::min({v[0], v[1], v[2]}));
        CHECK(std::stod(row[7]) == std::max({v[0], v[1], v[2]}));
        ++summaries;
      }
    }
    CHECK(details == 12);
    CHECK(summaries == 4);
    CHECK(rows[1][1].empty());
    CHECK(rows[9][1] == "10");
  }
  SUBCASE("km_sparse keeps K at its cap beyond it") {
    const TaskFiles big = markov_files(dir / "big", 25, 5);
    const Result r = run({"sweep", "--train", big.train.string(), "--test", big.test.string(), "--search", "none",
                          "--models", "km_sparse", "--n-res-list", "400", "800", "--k", "200", "--seeds", "0", "--out",
                          (dir / "big" / "out").string()});
    REQUIRE(r.code == 0);
    const auto rows = read_rows(dir / "big" / "out" / "sweep.csv");
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][1] == "200");
    CHECK(rows[1][2] == "400");
    CHECK(rows[3][2] == "800");
    CHECK(rows[1][8] == "ok");
  }
  SUBCASE("failed cells are recorded and the run continues") {
    // 360 training frames cannot form 500 clusters
    const Result r = sweep("fail", {"--models", "basic", "km_dense", "--n-res-list", "500", "--seeds", "0", "1"});
    REQUIRE(r.code == 0);
    const auto rows = read_rows(dir / "fail" / "sweep.csv");
    REQUIRE(rows.size() == 7);
    CHECK(rows[1][8] == "ok");
    CHECK(rows[4][8] == "failed");
    CHECK(rows[4][5].empty());
    CHECK(rows[6][8] == "summary");
    CHECK(rows[6][5].empty());
    CHECK(r.err.find("failed") != std::string::npos);
  }
  SUBCASE("byte identical across reruns and worker counts") {
    const std::vector<std::string> grid = {"--models", "basic", "km_sparse", "--n-res-list", "10", "30", "--k", "10",
                                           "--seeds", "0", "1"};
    auto g1 = grid, g3 = grid;
    g3.insert(g3.end(), {"--workers", "3"});
    REQUIRE(sweep("d1", g1).code == 0);
    REQUIRE(sweep("d2", g1).code == 0);
    REQUIRE(sweep("d3", g3).code == 0);
    CHECK(slurp(dir / "d1" / "sweep.csv") == slurp(dir / "d2" / "sweep.csv"));
    CHECK(slurp(dir / "d1" / "sweep.csv") == slurp(dir / "d3" / "sweep.csv"));
  }
  SUBCASE("JSON config with flag overrides") {
    json cfg = {{"train", f.train.string()}, {"test", f.test.string()}, {"models", {"basic"}},
                {"n_res_list", {10}},        {"seeds", {0, 1, 2, 3}},   {"search", "none"},
                {"out", (dir / "ignored").string()}};
    std::ofstream(dir / "cfg.json") << cfg.dump();
    REQUIRE(run({"--config", (dir / "cfg.json").string(), "sweep", "--seeds", "5", "--out", (dir / "c").string()})
                .code == 0);
    const auto rows = read_rows(dir / "c" / "sweep.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][3] == "5");
    CHECK_FALSE(fs::exists(dir / "ignored"));
  }
  SUBCASE("config invariants") {
    CHECK(sweep("bad", {"--models", "km_sparse", "--n-res-list", "10", "20", "--k-list", "30", "5"}).code ==
          cli::kExitConfig);
    CHECK(sweep("bad", {"--n-res-list", "10", "--seeds"}).code == cli::kExitConfig);
  }
}
