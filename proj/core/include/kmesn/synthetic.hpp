#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kmesn/data.hpp"
#include "kmesn/linalg.hpp"

namespace kmesn {

/// Isotropic Gaussian clusters around well separated means.
struct BlobConfig {
  std::size_t clusters = 3;
  std::size_t dim = 2;
  std::size_t points = 300;      ///< split as evenly as possible
  double sigma = 0.1;
  double min_separation = 2.0;   ///< pairwise distance between means
  double box = 5.0;              ///< means drawn uniformly in [-box, box]^dim
  std::uint64_t seed = 0;
};

struct Blobs {
  DenseMatrix points;                ///< shuffled
  std::vector<std::size_t> labels;   ///< generating cluster per point
  DenseMatrix means;                 ///< clusters x dim
};

/// ConfigError when the means cannot be placed after many rejections.
Blobs make_blobs(const BlobConfig& cfg);

/// Sequence classification task whose frames are noisy copies of a small
/// set of prototype vectors. Each class walks over the prototypes with its
/// own Markov chain, whose transition rows are Dirichlet(concentration)
/// draws; the first frame's prototype is uniform.
struct MarkovTaskConfig {
  std::size_t prototypes = 8;
  std::size_t dim = 20;
  std::size_t classes = 8;
  std::size_t length = 30;
  std::size_t train_sequences = 200;
  std::size_t test_sequences = 200;
  double noise = 1.0;
  double concentration = 0.3;
  std::uint64_t seed = 0;
};

struct TrainTestSplit {
  SequenceDataset train;
  SequenceDataset test;
  DenseMatrix prototypes;  ///< prototypes x dim
};

/// Labels are balanced (sequence i has class i mod classes) and the task
/// kind is sequence_level.
TrainTestSplit make_markov_task(const MarkovTaskConfig& cfg);

}  // namespace kmesn
