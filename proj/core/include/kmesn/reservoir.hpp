#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kmesn/linalg.hpp"

namespace kmesn {

enum class Activation { tanh, logistic, identity };

std::string_view to_string(Activation a) noexcept;
/// Parses "tanh", "logistic" (alias "sigmoid") or "identity"; ConfigError otherwise.
Activation parse_activation(std::string_view name);

/// Scalings and structural sizes of an ESN. The five scalings are the
/// tunable surface of the hyper-parameter search; the counts fix the shape.
struct HyperParams {
  double input_scaling = 1.0;
  double spectral_radius = 0.0;
  double leakage = 1.0;
  double bias_scaling = 0.0;
  double regularization = 1e-3;

  std::size_t reservoir_size = 50;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::size_t input_fanin = 10;
  std::size_t recurrent_fanin = 10;
  Activation activation = Activation::tanh;

  /// Throws ConfigError unless 0 < leakage <= 1, all scalings are finite and
  /// >= 0, all counts >= 1, input_fanin <= input_dim and
  /// recurrent_fanin <= reservoir_size.
  void validate() const;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

enum class InputInit { random, kmeans_dense, kmeans_sparse };

std::string_view to_string(InputInit i) noexcept;
InputInit parse_input_init(std::string_view name);

/// The three fixed matrices in unit-scale form. Effective weights are
/// input_scaling * w_in, spectral_radius * w_res and bias_scaling * w_bias,
/// applied on the fly by the state update.
struct WeightSet {
  SparseMatrix w_in;            ///< N_res x N_in
  SparseMatrix w_res;           ///< N_res x N_res, unit spectral radius
  std::vector<double> w_bias;   ///< N_res, entries in [-1, 1]
  InputInit input_init = InputInit::random;

  std::size_t reservoir_size() const noexcept { return w_res.rows(); }
  std::size_t input_dim() const noexcept { return w_in.cols(); }

  friend bool operator==(const WeightSet&, const WeightSet&) = default;
};

/// Reservoir state r[n]; length N_res.
using ReservoirState = std::vector<double>;

/// Recurrent weights (K_rec standard-normal entries per row, rescaled to unit
/// spectral radius) and bias (uniform on [-1, 1]). Shared by the random and
/// K-Means initializations so both see identical reservoirs for one seed.
SparseMatrix random_recurrent_weights(std::size_t reservoir_size, std::size_t fanin,
                                      std::uint64_t seed);
std::vector<double> random_bias(std::size_t reservoir_size, std::uint64_t seed);

/// Basic ESN weights: exactly K_in uniform[-1,1] input connections and K_rec
/// recurrent connections per reservoir row, sampled without replacement.
WeightSet init_random_weights(const HyperParams& hp, std::uint64_t seed);

/// Leaky state update
///   r = (1 - leakage) r_prev + leakage f(a_u W_in u + rho W_res r_prev + a_bi w_bias).
ReservoirState update_state(std::span<const double> r_prev, std::span<const double> u,
                            const WeightSet& w, const HyperParams& hp);

/// Runs the reservoir over the rows of `inputs` (T x N_in) starting from r0
/// (zero when absent). Row n of the result is r[n] followed by a constant 1.
DenseMatrix run_sequence(const DenseMatrix& inputs, const WeightSet& w, const HyperParams& hp,
                         std::optional<std::span<const double>> r0 = std::nullopt);

/// Running normal-equation sums G = sum r r^T and C = sum d r^T over
/// intercept-expanded states r. Accumulators from disjoint data can be merged.
class ReadoutAccumulator {
 public:
  ReadoutAccumulator() = default;
  /// `features` is N_res + 1.
  ReadoutAccumulator(std::size_t features, std::size_t outputs);

  /// Adds T frames: G += R^T R, C += D^T R. Throws DimensionError on shape
  /// mismatch.
  void accumulate(const DenseMatrix& states, const DenseMatrix& targets);
  /// Elementwise sum with `other`. Throws DimensionError on shape mismatch.
  void merge(const ReadoutAccumulator& other);

  std::size_t features() const noexcept { return gram_.rows(); }
  std::size_t outputs() const noexcept { return cross_.rows(); }
  const DenseMatrix& gram() const noexcept { return gram_; }
  const DenseMatrix& cross() const noexcept { return cross_; }
  std::uint64_t sample_count() const noexcept { return samples_; }

 private:
  DenseMatrix gram_;
  DenseMatrix cross_;
  std::uint64_t samples_ = 0;
};

ReadoutAccumulator merge(const ReadoutAccumulator& a, const ReadoutAccumulator& b);

/// Trained linear readout, N_out x (N_res + 1).
struct Readout {
  DenseMatrix w_out;

  friend bool operator==(const Readout&, const Readout&) = default;
};

/// W_out = C (G + eps I)^-1, computed with solve_spd. eps must be >= 0.
Readout finalize(const ReadoutAccumulator& acc, double regularization);

/// Y = R W_out^T, one output row per state row.
DenseMatrix predict(const DenseMatrix& states, const Readout& readout);

}  // namespace kmesn
