#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kmesn/linalg.hpp"

namespace kmesn {

/// K cluster prototypes (rows of `mu`) plus the per-center hit counters
/// accumulated by mini-batch training.
struct Centroids {
  DenseMatrix mu;                      ///< K x N_in
  std::vector<std::uint64_t> counts;   ///< length K

  std::size_t k() const noexcept { return mu.rows(); }
  std::size_t dim() const noexcept { return mu.cols(); }

  friend bool operator==(const Centroids&, const Centroids&) = default;
};

struct ClusterConfig {
  std::size_t k = 8;
  std::size_t batch_size = 1024;     ///< clamped to the number of observations
  std::size_t max_iterations = 300;  ///< fixed budget, no early stopping
  std::uint64_t seed = 0;
  /// Centers hit at most this many times during training are re-seeded to
  /// random observations. 0 re-seeds only centers that were never hit.
  double reassign_threshold = 0.0;

  void validate() const;
};

/// Per-observation index of the nearest centroid.
struct Assignment {
  std::vector<std::size_t> labels;
};

/// K-Means++ seeding: first center uniform, later ones sampled with
/// probability proportional to squared distance to the nearest chosen
/// center. Always returns k distinct rows of X. ConfigError when N < k.
Centroids kmeanspp_init(const DenseMatrix& x, std::size_t k, std::uint64_t seed);

/// Sculley-style mini-batch K-Means seeded by kmeanspp_init. Each iteration
/// draws batch_size rows uniformly with replacement, caches their nearest
/// centers, then moves every center toward its points with per-center
/// learning rate 1 / count.
Centroids minibatch_kmeans(const DenseMatrix& x, const ClusterConfig& cfg);

/// Nearest centroid by Euclidean distance; ties go to the lower index.
Assignment assign(const DenseMatrix& x, const Centroids& c);

/// Within-cluster sum of squared distances under assign's partition.
double sse(const DenseMatrix& x, const Centroids& c);

struct ElbowPoint {
  std::size_t k;
  double sse;
};

/// One independently seeded minibatch_kmeans run per requested k.
/// `ks` must be non-empty and strictly ascending.
std::vector<ElbowPoint> elbow_scan(const DenseMatrix& x, const std::vector<std::size_t>& ks,
                                   const ClusterConfig& base);

}  // namespace kmesn
