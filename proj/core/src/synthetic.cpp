#include "kmesn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kmesn/errors.hpp"
#include "kmesn/rng.hpp"

namespace kmesn {

namespace {

constexpr std::uint64_t kStreamMeans = 31;
constexpr std::uint64_t kStreamPoints = 32;
constexpr std::uint64_t kStreamPrototypes = 33;
constexpr std::uint64_t kStreamTrain = 34;
constexpr std::uint64_t kStreamTest = 35;
constexpr std::uint64_t kStreamChains = 36;

using Chain = std::vector<std::discrete_distribution<std::size_t>>;

std::vector<Chain> class_chains(const MarkovTaskConfig& cfg, Rng& rng) {
  std::gamma_distribution<double> gamma(cfg.concentration, 1.0);
  std::vector<Chain> chains(cfg.classes);
  std::vector<double> row(cfg.prototypes);
  for (auto& chain : chains) {
    for (std::size_t s = 0; s < cfg.prototypes; ++s) {
      for (double& v : row) v = gamma(rng);
      chain.emplace_back(row.begin(), row.end());
    }
  }
  return chains;
}

SequenceDataset markov_sequences(const MarkovTaskConfig& cfg, const DenseMatrix& protos,
                                 const std::vector<Chain>& chains, std::size_t count, Rng& rng) {
  std::normal_distribution<double> noise(0.0, cfg.noise);
  SequenceDataset ds;
  ds.n_classes = cfg.classes;
  ds.task = TaskKind::sequence_level;
  ds.sequences.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % cfg.classes;
    auto chain = chains[label];
    Sequence seq;
    seq.id = static_cast<std::int64_t>(i);
    seq.labels = {label};
    seq.features = DenseMatrix(cfg.length, cfg.dim);
    std::size_t state = uniform_index(rng, cfg.prototypes);
    for (std::size_t t = 0; t < cfg.length; ++t) {
      if (t > 0) state = chain[state](rng);
      auto row = seq.features.row(t);
      for (std::size_t j = 0; j < cfg.dim; ++j) row[j] = protos(state, j) + noise(rng);
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace

Blobs make_blobs(const BlobConfig& cfg) {
  if (cfg.clusters == 0 || cfg.dim == 0 || cfg.points < cfg.clusters) {
    throw ConfigError("blobs need clusters >= 1, dim >= 1 and points >= clusters");
  }
  if (!(cfg.sigma >= 0.0) || !(cfg.box > 0.0)) throw ConfigError("blob sigma must be >= 0 and box > 0");

  Rng rng = make_rng(cfg.seed, kStreamMeans);
  DenseMatrix means(cfg.clusters, cfg.dim);
  for (std::size_t k = 0; k < cfg.clusters; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      auto row = means.row(k);
      for (double& v : row) v = uniform(rng, -cfg.box, cfg.box);
      placed = true;
      for (std::size_t other = 0; other < k && placed; ++other) {
        double d = 0.0;
        for (std::size_t j = 0; j < cfg.dim; ++j) d += (row[j] - means(other, j)) * (row[j] - means(other, j));
        placed = std::sqrt(d) >= cfg.min_separation;
      }
    }
    if (!placed) throw ConfigError("could not place blob means with the requested separation");
  }

  Rng prng = make_rng(cfg.seed, kStreamPoints);
  std::normal_distribution<double> noise(0.0, cfg.sigma);
  std::vector<std::size_t> labels(cfg.points);
  for (std::size_t i = 0; i < cfg.points; ++i) labels[i] = i % cfg.clusters;
  std::shuffle(labels.begin(), labels.end(), prng);
  DenseMatrix points(cfg.points, cfg.dim);
  for (std::size_t i = 0; i < cfg.points; ++i)
    for (std::size_t j = 0; j < cfg.dim; ++j) points(i, j) = means(labels[i], j) + noise(prng);
  return Blobs{std::move(points), std::move(labels), std::move(means)};
}

TrainTestSplit make_markov_task(const MarkovTaskConfig& cfg) {
  if (cfg.prototypes == 0 || cfg.dim == 0 || cfg.classes == 0 || cfg.length == 0 ||
      cfg.train_sequences == 0 || cfg.test_sequences == 0) {
    throw ConfigError("Markov task sizes must all be >= 1");
  }
  if (!(cfg.concentration > 0.0) || !(cfg.noise >= 0.0)) {
    throw ConfigError("Markov task needs concentration > 0 and noise >= 0");
  }
  Rng prng = make_rng(cfg.seed, kStreamPrototypes);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix protos(cfg.prototypes, cfg.dim);
  for (double& v : protos.values()) v = normal(prng);

  Rng crng = make_rng(cfg.seed, kStreamChains);
  const std::vector<Chain> chains = class_chains(cfg, crng);

  Rng train_rng = make_rng(cfg.seed, kStreamTrain);
  Rng test_rng = make_rng(cfg.seed, kStreamTest);
  TrainTestSplit out;
  out.train = markov_sequences(cfg, protos, chains, cfg.train_sequences, train_rng);
  out.test = markov_sequences(cfg, protos, chains, cfg.test_sequences, test_rng);
  out.prototypes = std::move(protos);
  return out;
}

}  // namespace kmesn
