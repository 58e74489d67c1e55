#include "kmesn/reservoir.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "kmesn/errors.hpp"
#include "kmesn/rng.hpp"

namespace kmesn {

namespace {

// Generator streams. Input, recurrent and bias draws never share a stream.
constexpr std::uint64_t kStreamInput = 1;
constexpr std::uint64_t kStreamRecurrent = 2;
constexpr std::uint64_t kStreamBias = 3;
constexpr std::uint64_t kStreamEigen = 4;

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

// Picks `k` distinct indices from [0, n) by partial Fisher-Yates.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k,
                                                    std::vector<std::size_t>& pool) {
  pool.resize(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, n - i);
    std::swap(pool[i], pool[j]);
  }
  return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k)};
}

void check_dims(const WeightSet& w, const HyperParams& hp) {
  if (w.w_res.rows() != w.w_res.cols() || w.w_in.rows() != w.w_res.rows() ||
      w.w_bias.size() != w.w_res.rows()) {
    throw DimensionError("weight set has inconsistent shapes");
  }
  if (hp.reservoir_size != w.reservoir_size() || hp.input_dim != w.input_dim()) {
    throw DimensionError("hyper-parameters (N_res=" + std::to_string(hp.reservoir_size) +
                         ", N_in=" + std::to_string(hp.input_dim) +
                         ") do not match weight set (N_res=" + std::to_string(w.reservoir_size()) +
                         ", N_in=" + std::to_string(w.input_dim()) + ")");
  }
}

double activate(Activation a, double x) noexcept {
  switch (a) {
    case Activation::tanh:
      return std::tanh(x);
    case Activation::logistic:
      return 1.0 / (1.0 + std::exp(-x));
    case Activation::identity:
      return x;
  }
  return x;
}

// One leaky step with caller-provided scratch; `next` must not alias `prev`.
void step(std::span<const double> prev, std::span<const double> u, const WeightSet& w,
          const HyperParams& hp, std::span<double> scratch, std::span<double> next) {
  const std::size_t n = w.reservoir_size();
  spmv_into(w.w_in, u, next);
  spmv_into(w.w_res, prev, scratch);
  const double leak = hp.leakage;
  for (std::size_t i = 0; i < n; ++i) {
    const double pre = hp.input_scaling * next[i] + hp.spectral_radius * scratch[i] +
                       hp.bias_scaling * w.w_bias[i];
    const double act = activate(hp.activation, pre);
    next[i] = leak == 1.0 ? act : (1.0 - leak) * prev[i] + leak * act;
  }
}

}  // namespace

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::tanh:
      return "tanh";
    case Activation::logistic:
      return "logistic";
    case Activation::identity:
      return "identity";
  }
  return "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "logistic" || name == "sigmoid") return Activation::logistic;
  if (name == "identity" || name == "linear") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(InputInit i) noexcept {
  switch (i) {
    case InputInit::random:
      return "random";
    case InputInit::kmeans_dense:
      return "kmeans_dense";
    case InputInit::kmeans_sparse:
      return "kmeans_sparse";
  }
  return "random";
}

InputInit parse_input_init(std::string_view name) {
  if (name == "random") return InputInit::random;
  if (name == "kmeans_dense") return InputInit::kmeans_dense;
  if (name == "kmeans_sparse") return InputInit::kmeans_sparse;
  throw ConfigError("unknown input initialization '" + std::string(name) + "'");
}

void HyperParams::validate() const {
  if (!(leakage > 0.0 && leakage <= 1.0)) {
    throw ConfigError("leakage must lie in (0, 1], got " + std::to_string(leakage));
  }
  if (!finite_nonneg(input_scaling) || !finite_nonneg(spectral_radius) ||
      !finite_nonneg(bias_scaling) || !finite_nonneg(regularization)) {
    throw ConfigError("scalings and regularization must be finite and >= 0");
  }
  if (reservoir_size < 1 || input_dim < 1 || output_dim < 1 || input_fanin < 1 ||
      recurrent_fanin < 1) {
    throw ConfigError("all structural counts must be >= 1");
  }
  if (input_fanin > input_dim) {
    throw ConfigError("input fan-in " + std::to_string(input_fanin) + " exceeds input dimension " +
                      std::to_string(input_dim));
  }
  if (recurrent_fanin > reservoir_size) {
    throw ConfigError("recurrent fan-in " + std::to_string(recurrent_fanin) +
                      " exceeds reservoir size " + std::to_string(reservoir_size));
  }
}

SparseMatrix random_recurrent_weights(std::size_t reservoir_size, std::size_t fanin,
                                      std::uint64_t seed) {
  if (fanin < 1 || fanin > reservoir_size) {
    throw ConfigError("recurrent fan-in must lie in [1, N_res]");
  }
  Rng rng = make_rng(seed, kStreamRecurrent);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Triplet> entries;
  entries.reserve(reservoir_size * fanin);
  std::vector<std::size_t> pool;
  for (std::size_t r = 0; r < reservoir_size; ++r) {
    for (std::size_t c : sample_without_replacement(rng, reservoir_size, fanin, pool)) {
      double v = 0.0;
      while (v == 0.0) v = normal(rng);
      entries.push_back({r, c, v});
    }
  }
  SparseMatrix raw = SparseMatrix::from_triplets(reservoir_size, reservoir_size, std::move(entries));
  const double radius =
      largest_abs_eigenvalue(raw, {.tol = 1e-8, .max_iter = 10000, .seed = derive_seed(seed, kStreamEigen)});
  return raw.scaled(1.0 / radius);
}

std::vector<double> random_bias(std::size_t reservoir_size, std::uint64_t seed) {
  Rng rng = make_rng(seed, kStreamBias);
  std::vector<double> bias(reservoir_size);
  for (double& b : bias) b = uniform(rng, -1.0, 1.0);
  return bias;
}

WeightSet init_random_weights(const HyperParams& hp, std::uint64_t seed) {
  hp.validate();
  Rng rng = make_rng(seed, kStreamInput);
  std::vector<Triplet> entries;
  entries.reserve(hp.reservoir_size * hp.input_fanin);
  std::vector<std::size_t> pool;
  for (std::size_t r = 0; r < hp.reservoir_size; ++r) {
    for (std::size_t c : sample_without_replacement(rng, hp.input_dim, hp.input_fanin, pool)) {
      double v = 0.0;
      while (v == 0.0) v = uniform(rng, -1.0, 1.0);
      entries.push_back({r, c, v});
    }
  }
  WeightSet w;
  w.w_in = SparseMatrix::from_triplets(hp.reservoir_size, hp.input_dim, std::move(entries));
  w.w_res = random_recurrent_weights(hp.reservoir_size, hp.recurrent_fanin, seed);
  w.w_bias = random_bias(hp.reservoir_size, seed);
  w.input_init = InputInit::random;
  return w;
}

ReservoirState update_state(std::span<const double> r_prev, std::span<const double> u,
                            const WeightSet& w, const HyperParams& hp) {
  check_dims(w, hp);
  if (r_prev.size() != w.reservoir_size()) {
    throw DimensionError("state length " + std::to_string(r_prev.size()) + " != N_res " +
                         std::to_string(w.reservoir_size()));
  }
  if (u.size() != w.input_dim()) {
    throw DimensionError("input length " + std::to_string(u.size()) + " != N_in " +
                         std::to_string(w.input_dim()));
  }
  ReservoirState next(w.reservoir_size());
  std::vector<double> scratch(w.reservoir_size());
  step(r_prev, u, w, hp, scratch, next);
  return next;
}

DenseMatrix run_sequence(const DenseMatrix& inputs, const WeightSet& w, const HyperParams& hp,
                         std::optional<std::span<const double>> r0) {
  check_dims(w, hp);
  const std::size_t n = w.reservoir_size();
  if (inputs.cols() != w.input_dim() && inputs.rows() > 0) {
    throw DimensionError("input sequence has " + std::to_string(inputs.cols()) +
                         " features, expected " + std::to_string(w.input_dim()));
  }
  if (r0 && r0->size() != n) throw DimensionError("initial state length does not match N_res");

  DenseMatrix out(inputs.rows(), n + 1);
  std::vector<double> prev(n, 0.0), scratch(n);
  if (r0) std::copy(r0->begin(), r0->end(), prev.begin());
  for (std::size_t t = 0; t < inputs.rows(); ++t) {
    auto row = out.row(t);
    std::span<const double> previous =
        t == 0 ? std::span<const double>(prev) : std::span<const double>(out.row(t - 1).first(n));
    step(previous, inputs.row(t), w, hp, scratch, row.first(n));
    row[n] = 1.0;
  }
  return out;
}

ReadoutAccumulator::ReadoutAccumulator(std::size_t features, std::size_t outputs)
    : gram_(features, features), cross_(outputs, features) {}

void ReadoutAccumulator::accumulate(const DenseMatrix& states, const DenseMatrix& targets) {
  if (states.rows() != targets.rows()) {
    throw DimensionError("accumulate: " + std::to_string(states.rows()) + " states vs " +
                         std::to_string(targets.rows()) + " targets");
  }
  if (states.rows() == 0) return;
  const std::size_t f = features();
  if (states.cols() != f || targets.cols() != outputs()) {
    throw DimensionError("accumulate: state/target widths do not match the accumulator");
  }
  // upper triangle of G, then mirror
  for (std::size_t t = 0; t < states.rows(); ++t) {
    const auto r = states.row(t);
    for (std::size_t i = 0; i < f; ++i) {
      const double ri = r[i];
      if (ri == 0.0) continue;
      auto gi = gram_.row(i);
      for (std::size_t j = i; j < f; ++j) gi[j] += ri * r[j];
    }
    const auto d = targets.row(t);
    for (std::size_t o = 0; o < outputs(); ++o) {
      const double dv = d[o];
      if (dv == 0.0) continue;
      auto co = cross_.row(o);
      for (std::size_t j = 0; j < f; ++j) co[j] += dv * r[j];
    }
  }
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = i + 1; j < f; ++j) gram_(j, i) = gram_(i, j);
  samples_ += states.rows();
}

void ReadoutAccumulator::merge(const ReadoutAccumulator& other) {
  if (other.features() != features() || other.outputs() != outputs()) {
    throw DimensionError("merge: accumulator shapes differ");
  }
  auto g = gram_.values();
  auto og = other.gram_.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i];
  auto c = cross_.values();
  auto oc = other.cross_.values();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += oc[i];
  samples_ += other.samples_;
}

ReadoutAccumulator merge(const ReadoutAccumulator& a, const ReadoutAccumulator& b) {
  ReadoutAccumulator out = a;
  out.merge(b);
  return out;
}

Readout finalize(const ReadoutAccumulator& acc, double regularization) {
  if (!(regularization >= 0.0) || !std::isfinite(regularization)) {
    throw ConfigError("regularization must be finite and >= 0");
  }
  DenseMatrix g = acc.gram();
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += regularization;
  return Readout{solve_spd(g, acc.cross())};
}

DenseMatrix predict(const DenseMatrix& states, const Readout& readout) {
  const DenseMatrix& w = readout.w_out;
  if (states.rows() > 0 && states.cols() != w.cols()) {
    throw DimensionError("predict: states have " + std::to_string(states.cols()) +
                         " columns, readout expects " + std::to_string(w.cols()));
  }
  DenseMatrix y(states.rows(), w.rows());
  for (std::size_t t = 0; t < states.rows(); ++t) {
    const auto r = states.row(t);
    auto out = y.row(t);
    for (std::size_t o = 0; o < w.rows(); ++o) out[o] = dot(w.row(o), r);
  }
  return y;
}

}  // namespace kmesn
