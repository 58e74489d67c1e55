#include "kmesn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <string>

#include "kmesn/errors.hpp"

namespace kmesn {

namespace {

void require_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DegenerateInput("matrix entry is not finite");
  }
}

std::string shape(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

// ---------------------------------------------------------------------------
// DenseMatrix

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw DimensionError("dense matrix " + shape(rows_, cols_) + " given " +
                         std::to_string(values_.size()) + " values");
  }
  require_finite(values_);
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged rows in DenseMatrix::from_rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return DenseMatrix(rows.size(), cols, std::move(values));
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> entries) {
  for (const auto& e : entries) {
    if (e.row >= rows || e.col >= cols) {
      throw DimensionError("triplet (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                           ") outside " + shape(rows, cols));
    }
    if (!std::isfinite(e.value)) throw DegenerateInput("sparse entry is not finite");
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].row == entries[i - 1].row && entries[i].col == entries[i - 1].col) {
      throw ConfigError("duplicate sparse entry (" + std::to_string(entries[i].row) + ", " +
                        std::to_string(entries[i].col) + ")");
    }
  }

  SparseMatrix m(rows, cols);
  m.col_idx_.reserve(entries.size());
  m.values_.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.value == 0.0) continue;
    ++m.row_ptr_[e.row + 1];
    m.col_idx_.push_back(e.col);
    m.values_.push_back(e.value);
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<Triplet> entries;
  for (std::size_t i = 0; i < dense.rows(); ++i)
    for (std::size_t j = 0; j < dense.cols(); ++j)
      if (dense(i, j) != 0.0) entries.push_back({i, j, dense(i, j)});
  return from_triplets(dense.rows(), dense.cols(), std::move(entries));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(entries));
}

SparseMatrix SparseMatrix::scaled(double factor) const {
  if (factor == 0.0) return SparseMatrix(rows_, cols_);
  SparseMatrix m = *this;
  for (double& v : m.values_) v *= factor;
  require_finite(m.values_);
  return m;
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) = values_[k];
  return d;
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      out.push_back({r, col_idx_[k], values_[k]});
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

void spmv_into(const SparseMatrix& m, std::span<const double> x, std::span<double> y) {
  const auto row_ptr = m.row_ptr();
  const auto cols = m.col_idx();
  const auto vals = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) sum += vals[k] * x[cols[k]];
    y[r] = sum;
  }
}

std::vector<double> spmv(const SparseMatrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) {
    throw DimensionError("spmv: vector of length " + std::to_string(x.size()) + " for " +
                         shape(m.rows(), m.cols()) + " matrix");
  }
  std::vector<double> y(m.rows());
  spmv_into(m, x, y);
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

namespace {

double norm2(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void scale(double a, std::span<double> x) noexcept {
  for (double& v : x) v *= a;
}

// Largest eigenvalue modulus of an upper Hessenberg matrix (n x n, stored
// 1-based in a (n+1) x (n+1) buffer) by the Francis double-shift QR
// algorithm. The buffer is destroyed. Returns a negative value when the
// iteration fails to deflate.
double hessenberg_max_modulus(std::vector<std::vector<double>>& a, int n) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  double anorm = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a[i][j]);

  double best = 0.0;
  auto take = [&](double re, double im) { best = std::max(best, std::hypot(re, im)); };

  int nn = n;
  double t = 0.0;
  while (nn >= 1) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        double s = std::abs(a[l - 1][l - 1]) + std::abs(a[l][l]);
        if (s == 0.0) s = anorm;
        if (std::abs(a[l][l - 1]) <= kEps * s) {
          a[l][l - 1] = 0.0;
          break;
        }
      }
      double x = a[nn][nn];
      if (l == nn) {
        take(x + t, 0.0);
        --nn;
      } else {
        double y = a[nn - 1][nn - 1];
        double w = a[nn][nn - 1] * a[nn - 1][nn];
        if (l == nn - 1) {
          const double p = 0.5 * (y - x);
          const double q = p * p + w;
          double z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + std::copysign(z, p);
            take(x + z, 0.0);
            take(z != 0.0 ? x - w / z : x + z, 0.0);
          } else {
            take(x + p, z);
          }
          nn -= 2;
        } else {
          if (its == 60) return -1.0;
          if (its == 10 || its == 20 || its == 40) {
            // exceptional shift
            t += x;
            for (int i = 1; i <= nn; ++i) a[i][i] -= x;
            const double s = std::abs(a[nn][nn - 1]) + std::abs(a[nn - 1][nn - 2]);
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
          for (; m >= l; --m) {
            z = a[m][m];
            r = x - z;
            double s = y - z;
            p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
            q = a[m + 1][m + 1] - z - r - s;
            r = a[m + 2][m + 1];
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a[m][m - 1]) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a[m - 1][m - 1]) + std::abs(z) + std::abs(a[m + 1][m + 1]));
            if (u <= kEps * v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a[i][i - 2] = 0.0;
            if (i != m + 2) a[i][i - 3] = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a[k][k - 1];
              q = a[k + 1][k - 1];
              r = k != nn - 1 ? a[k + 2][k - 1] : 0.0;
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            const double s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
            if (s == 0.0) continue;
            if (k == m) {
              if (l != m) a[k][k - 1] = -a[k][k - 1];
            } else {
              a[k][k - 1] = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
              p = a[k][j] + q * a[k + 1][j];
              if (k != nn - 1) {
                p += r * a[k + 2][j];
                a[k + 2][j] -= p * z;
              }
              a[k + 1][j] -= p * y;
              a[k][j] -= p * x;
            }
            const int mmin = std::min(nn, k + 3);
            for (int i = l; i <= mmin; ++i) {
              p = x * a[i][k] + y * a[i][k + 1];
              if (k != nn - 1) {
                p += z * a[i][k + 2];
                a[i][k + 2] -= p * r;
              }
              a[i][k + 1] -= p * q;
              a[i][k] -= p;
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  return best;
}

// True when the sparsity graph has no directed cycle, which makes the
// matrix nilpotent regardless of its values.
bool structurally_nilpotent(const SparseMatrix& m) {
  const std::size_t n = m.rows();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t c : m.col_idx()) ++indegree[c];
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::size_t visited = 0;
  while (!ready.empty()) {
    const std::size_t r = ready.back();
    ready.pop_back();
    ++visited;
    for (std::size_t p = m.row_ptr()[r]; p < m.row_ptr()[r + 1]; ++p)
      if (--indegree[m.col_idx()[p]] == 0) ready.push_back(m.col_idx()[p]);
  }
  return visited == n;
}

// Dominant Ritz modulus of the leading k x k block of the Arnoldi matrix.
double ritz_max_modulus(const std::vector<std::vector<double>>& h, std::size_t k) {
  const int n = static_cast<int>(k);
  std::vector<std::vector<double>> a(k + 1, std::vector<double>(k + 1, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = (i == 0 ? 0 : i - 1); j < k; ++j) a[i + 1][j + 1] = h[i][j];
  const double v = hessenberg_max_modulus(a, n);
  if (v < 0.0) throw DegenerateSpectrum("Hessenberg QR failed to converge");
  return v;
}

}  // namespace

double largest_abs_eigenvalue(const SparseMatrix& m, const EigenOptions& opts) {
  if (m.rows() != m.cols()) {
    throw DimensionError("largest_abs_eigenvalue: matrix " + shape(m.rows(), m.cols()) +
                         " is not square");
  }
  if (!(opts.tol > 0.0) || opts.max_iter < 1) {
    throw ConfigError("largest_abs_eigenvalue: tol must be > 0 and max_iter >= 1");
  }
  const std::size_t n = m.rows();
  if (n == 0 || m.nnz() == 0) throw DegenerateSpectrum("matrix has no non-zero entries");
  if (structurally_nilpotent(m)) throw DegenerateSpectrum("matrix is nilpotent (acyclic sparsity)");

  const std::size_t cap = std::min(n, opts.max_iter);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> basis;
  basis.reserve(std::min<std::size_t>(cap + 1, 512));
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  scale(1.0 / norm2(v), v);
  basis.push_back(v);

  // Arnoldi matrix, rows appended as the basis grows.
  std::vector<std::vector<double>> h(1, std::vector<double>(cap, 0.0));
  std::vector<double> w(n);
  double previous = -1.0;
  int stable = 0;
  std::size_t next_check = 2;

  for (std::size_t k = 0; k < cap; ++k) {
    spmv_into(m, basis[k], w);
    const double wnorm = norm2(w);
    h.emplace_back(cap, 0.0);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j <= k; ++j) {
        const double c = dot(basis[j], w);
        h[j][k] += c;
        axpy(-c, basis[j], w);
      }
    }
    const double sub = norm2(w);
    h[k + 1][k] = sub;
    const std::size_t dim = k + 1;
    const bool invariant = sub <= 1e-12 * std::max(wnorm, 1e-300) || dim == n;

    if (invariant || dim >= next_check || dim == cap) {
      const double estimate = ritz_max_modulus(h, dim);
      if (invariant) {
        if (!(estimate > 0.0)) throw DegenerateSpectrum("matrix is nilpotent on the start vector");
        return estimate;
      }
      if (previous >= 0.0 && std::abs(estimate - previous) < opts.tol * estimate) {
        if (++stable >= 2) return estimate;
      } else {
        stable = 0;
      }
      previous = estimate;
      next_check = dim + std::max<std::size_t>(1, dim / 10);
    }
    if (dim == cap) break;
    scale(1.0 / sub, w);
    basis.push_back(w);
  }
  throw DegenerateSpectrum("Krylov iteration did not converge within " + std::to_string(cap) +
                           " dimensions");
}

// ---------------------------------------------------------------------------
// Dense solves

namespace {

// In-place lower Cholesky factor of `a` (n x n). Returns false when a pivot
// drops below `min_pivot`.
bool cholesky(DenseMatrix& a, double min_pivot) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > min_pivot)) return false;
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

DenseMatrix solve_spd(const DenseMatrix& g, const DenseMatrix& b) {
  const std::size_t n = g.rows();
  if (g.cols() != n) throw DimensionError("solve_spd: G " + shape(g.rows(), g.cols()) + " is not square");
  if (b.cols() != n) {
    throw DimensionError("solve_spd: B " + shape(b.rows(), b.cols()) + " does not match G " +
                         shape(n, n));
  }
  if (n == 0) return DenseMatrix(b.rows(), 0);

  double max_diag = 0.0;
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_diag = std::max(max_diag, g(i, i));
    trace += g(i, i);
  }
  const double min_pivot = 1e-12 * max_diag;

  DenseMatrix l = g;
  if (!(max_diag > 0.0) || !cholesky(l, min_pivot)) {
    l = g;
    const double jitter = 1e-12 * trace / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) l(i, i) += jitter;
    if (!(jitter > 0.0) || !cholesky(l, min_pivot)) {
      throw SingularSystem("solve_spd: matrix is numerically singular");
    }
  }

  // Each row x of X satisfies G x^T = b^T: forward then backward substitution.
  DenseMatrix x = b;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto v = x.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      double s = v[i];
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * v[k];
      v[i] = s / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = v[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * v[k];
      v[i] = s / l(i, i);
    }
  }
  return x;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape(a.rows(), a.cols()) + " * " + shape(b.rows(), b.cols()));
  }
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

}  // namespace kmesn
