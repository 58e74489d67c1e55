#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "kmesn/clustering.hpp"
#include "kmesn/linalg.hpp"
#include "kmesn/reservoir.hpp"

namespace kmesn {

/// Input-weight layout of a K-Means initialized reservoir: the first K rows
/// carry the centroids, the remaining n_res - K rows receive no input.
struct KmInputSpec {
  Centroids centroids;
  std::size_t n_res = 0;
  bool normalize_rows = false;  ///< L2-normalize each centroid row
};

/// N_res x N_in input matrix with centroid rows on top. Exact-zero centroid
/// components become structural zeros. ConfigError when n_res < K.
SparseMatrix build_km_input_weights(const KmInputSpec& spec);

/// KM-ESN weights: input part from the centroids, recurrent part and bias
/// generated exactly as init_random_weights does for the same seed.
WeightSet build_km_weightset(const KmInputSpec& spec, const HyperParams& hp, std::uint64_t seed);

/// (w . u) / (|w| |u|). DegenerateInput for a zero vector, DimensionError for
/// unequal lengths.
double cosine_similarity(std::span<const double> w, std::span<const double> u);

}  // namespace kmesn
