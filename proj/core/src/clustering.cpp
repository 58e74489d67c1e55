#include "kmesn/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kmesn/errors.hpp"
#include "kmesn/rng.hpp"

namespace kmesn {

namespace {

constexpr std::uint64_t kStreamSeeding = 11;
constexpr std::uint64_t kStreamBatches = 12;
constexpr std::uint64_t kStreamReseed = 13;
constexpr std::uint64_t kStreamElbow = 14;

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct Nearest {
  std::size_t index;
  double distance;
};

Nearest nearest(std::span<const double> point, const DenseMatrix& mu) noexcept {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < mu.rows(); ++k) {
    const double d = squared_distance(point, mu.row(k));
    if (d < best.distance) best = {k, d};
  }
  return best;
}

void require_enough_rows(const DenseMatrix& x, std::size_t k) {
  if (k < 1) throw ConfigError("number of clusters must be >= 1");
  if (x.rows() < k) {
    throw ConfigError("cannot form " + std::to_string(k) + " clusters from " +
                      std::to_string(x.rows()) + " observations");
  }
}

void require_same_width(const DenseMatrix& x, const Centroids& c) {
  if (x.rows() > 0 && x.cols() != c.dim()) {
    throw DimensionError("observations have " + std::to_string(x.cols()) +
                         " features, centroids have " + std::to_string(c.dim()));
  }
}

}  // namespace

void ClusterConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(reassign_threshold >= 0.0)) throw ConfigError("reassign_threshold must be >= 0");
}

Centroids kmeanspp_init(const DenseMatrix& x, std::size_t k, std::uint64_t seed) {
  require_enough_rows(x, k);
  const std::size_t n = x.rows();
  Rng rng = make_rng(seed, kStreamSeeding);

  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  std::vector<bool> taken(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  auto take = [&](std::size_t idx) {
    chosen.push_back(idx);
    taken[idx] = true;
    const auto c = x.row(idx);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), c));
    d2[idx] = 0.0;
  };

  take(uniform_index(rng, n));
  while (chosen.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i]) total += d2[i];

    std::size_t pick = n;
    if (total > 0.0) {
      double target = uniform(rng, 0.0, total);
      std::size_t last_positive = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || d2[i] <= 0.0) continue;
        last_positive = i;
        if (target < d2[i]) {
          pick = i;
          break;
        }
        target -= d2[i];
      }
      if (pick == n) pick = last_positive;  // rounding at the upper end
    } else {
      // fewer distinct points than k: any untaken row
      std::size_t remaining = 0;
      for (std::size_t i = 0; i < n; ++i) remaining += taken[i] ? 0 : 1;
      std::size_t nth = uniform_index(rng, remaining);
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (nth-- == 0) {
          pick = i;
          break;
        }
      }
    }
    take(pick);
  }

  Centroids c{DenseMatrix(k, x.cols()), std::vector<std::uint64_t>(k, 0)};
  for (std::size_t j = 0; j < k; ++j) {
    const auto src = x.row(chosen[j]);
    std::copy(src.begin(), src.end(), c.mu.row(j).begin());
  }
  return c;
}

Centroids minibatch_kmeans(const DenseMatrix& x, const ClusterConfig& cfg) {
  cfg.validate();
  require_enough_rows(x, cfg.k);
  const std::size_t n = x.rows();
  const std::size_t batch = std::min(cfg.batch_size, n);

  Centroids c = kmeanspp_init(x, cfg.k, cfg.seed);
  Rng rng = make_rng(cfg.seed, kStreamBatches);
  std::vector<std::size_t> members(batch), nearest_center(batch);

  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    for (std::size_t b = 0; b < batch; ++b) members[b] = uniform_index(rng, n);
    for (std::size_t b = 0; b < batch; ++b) nearest_center[b] = nearest(x.row(members[b]), c.mu).index;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t k = nearest_center[b];
      const double eta = 1.0 / static_cast<double>(++c.counts[k]);
      auto center = c.mu.row(k);
      const auto point = x.row(members[b]);
      for (std::size_t j = 0; j < center.size(); ++j)
        center[j] += eta * (point[j] - center[j]);
    }
  }

  Rng reseed = make_rng(cfg.seed, kStreamReseed);
  for (std::size_t k = 0; k < c.k(); ++k) {
    if (static_cast<double>(c.counts[k]) > cfg.reassign_threshold) continue;
    const auto src = x.row(uniform_index(reseed, n));
    std::copy(src.begin(), src.end(), c.mu.row(k).begin());
  }
  return c;
}

Assignment assign(const DenseMatrix& x, const Centroids& c) {
  require_same_width(x, c);
  if (c.k() == 0) throw DimensionError("assign: no centroids");
  Assignment a;
  a.labels.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) a.labels[i] = nearest(x.row(i), c.mu).index;
  return a;
}

double sse(const DenseMatrix& x, const Centroids& c) {
  const Assignment a = assign(x, c);
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += squared_distance(x.row(i), c.mu.row(a.labels[i]));
  return total;
}

std::vector<ElbowPoint> elbow_scan(const DenseMatrix& x, const std::vector<std::size_t>& ks,
                                   const ClusterConfig& base) {
  if (ks.empty()) throw ConfigError("elbow scan needs at least one k");
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (ks[i] <= ks[i - 1]) throw ConfigError("elbow scan k list must be strictly ascending");
  }
  require_enough_rows(x, ks.back());
  std::vector<ElbowPoint> out;
  out.reserve(ks.size());
  for (std::size_t k : ks) {
    ClusterConfig cfg = base;
    cfg.k = k;
    cfg.seed = derive_seed(base.seed, kStreamElbow + k);
    out.push_back({k, sse(x, minibatch_kmeans(x, cfg))});
  }
  return out;
}

}  // namespace kmesn
