#include "kmesn/km_init.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kmesn/errors.hpp"

namespace kmesn {

SparseMatrix build_km_input_weights(const KmInputSpec& spec) {
  const DenseMatrix& mu = spec.centroids.mu;
  const std::size_t k = mu.rows();
  if (k < 1) throw ConfigError("no centroids");
  if (spec.n_res < k) {
    throw ConfigError("reservoir size " + std::to_string(spec.n_res) + " is smaller than K=" +
                      std::to_string(k));
  }
  std::vector<Triplet> entries;
  for (std::size_t r = 0; r < k; ++r) {
    const auto row = mu.row(r);
    double scale = 1.0;
    if (spec.normalize_rows) {
      const double norm = std::sqrt(dot(row, row));
      if (norm == 0.0) continue;  // degenerate centroid stays all-zero
      scale = 1.0 / norm;
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] != 0.0) entries.push_back({r, c, row[c] * scale});
    }
  }
  return SparseMatrix::from_triplets(spec.n_res, mu.cols(), std::move(entries));
}

WeightSet build_km_weightset(const KmInputSpec& spec, const HyperParams& hp, std::uint64_t seed) {
  if (hp.reservoir_size != spec.n_res) {
    throw ConfigError("hyper-parameter reservoir size " + std::to_string(hp.reservoir_size) +
                      " differs from KM spec " + std::to_string(spec.n_res));
  }
  if (hp.input_dim != spec.centroids.dim()) {
    throw ConfigError("hyper-parameter input dimension " + std::to_string(hp.input_dim) +
                      " differs from centroid width " + std::to_string(spec.centroids.dim()));
  }
  if (hp.recurrent_fanin < 1 || hp.recurrent_fanin > hp.reservoir_size) {
    throw ConfigError("recurrent fan-in must lie in [1, N_res]");
  }
  WeightSet w;
  w.w_in = build_km_input_weights(spec);
  w.w_res = random_recurrent_weights(hp.reservoir_size, hp.recurrent_fanin, seed);
  w.w_bias = random_bias(hp.reservoir_size, seed);
  w.input_init = spec.centroids.k() == spec.n_res ? InputInit::kmeans_dense : InputInit::kmeans_sparse;
  return w;
}

double cosine_similarity(std::span<const double> w, std::span<const double> u) {
  if (w.size() != u.size()) throw DimensionError("cosine_similarity: length mismatch");
  const double nw = std::sqrt(dot(w, w));
  const double nu = std::sqrt(dot(u, u));
  if (nw == 0.0 || nu == 0.0) throw DegenerateInput("cosine_similarity: zero vector");
  return std::clamp(dot(w, u) / (nw * nu), -1.0, 1.0);
}

}  // namespace kmesn
