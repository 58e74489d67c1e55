#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace kmesn {

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  /// Zero-filled rows x cols matrix.
  DenseMatrix(std::size_t rows, std::size_t cols);
  /// Takes ownership of `values` (row-major). Throws DimensionError when
  /// values.size() != rows * cols and DegenerateInput on non-finite entries.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static DenseMatrix identity(std::size_t n);
  /// Builds from nested rows; all rows must have equal length.
  static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// One (row, col, value) entry used to build a SparseMatrix.
struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed-sparse-row matrix. Immutable after construction; entries are
/// sorted by column inside each row and every stored value is non-zero.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  /// Empty (all-zero) rows x cols matrix.
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Builds from unordered triplets. Exact zeros are dropped. Throws
  /// DimensionError for out-of-range indices, ConfigError for duplicate
  /// (row, col) pairs and DegenerateInput for non-finite values.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> entries);
  /// Keeps every non-zero entry of `dense`.
  static SparseMatrix from_dense(const DenseMatrix& dense);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  std::size_t row_nnz(std::size_t r) const noexcept { return row_ptr_[r + 1] - row_ptr_[r]; }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Returns a copy with every value multiplied by `factor` (factor == 0
  /// yields an empty matrix of the same shape).
  SparseMatrix scaled(double factor) const;
  DenseMatrix to_dense() const;
  std::vector<Triplet> triplets() const;

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

/// y = M * x. Throws DimensionError when x.size() != M.cols().
std::vector<double> spmv(const SparseMatrix& m, std::span<const double> x);

/// y = M * x written into `y` (resized by the caller). No allocation.
void spmv_into(const SparseMatrix& m, std::span<const double> x, std::span<double> y);

struct EigenOptions {
  double tol = 1e-8;
  std::size_t max_iter = 10000;
  std::uint64_t seed = 0;
};

/// Estimates max |lambda_i(M)| from the Ritz values of an Arnoldi
/// (Krylov) factorization started from a seeded random vector. Ritz values
/// come from a Francis double-shift QR on the small Hessenberg matrix, so
/// complex-conjugate and +/- real dominant pairs are resolved.
///
/// Converged when the dominant Ritz modulus changes by less than
/// tol * estimate on two successive checks, or exactly when the Krylov space
/// becomes invariant. max_iter caps the Krylov dimension. Throws
/// DimensionError for non-square input and DegenerateSpectrum for all-zero /
/// nilpotent matrices or when the cap is reached first.
double largest_abs_eigenvalue(const SparseMatrix& m, const EigenOptions& opts = {});

/// Solves X * G = B for symmetric positive definite G by Cholesky
/// factorization. When a pivot falls below 1e-12 * max(diag(G)) the
/// factorization is retried once with 1e-12 * trace(G) / n added to the
/// diagonal; a second failure throws SingularSystem.
DenseMatrix solve_spd(const DenseMatrix& g, const DenseMatrix& b);

/// Dense product A * B.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// Max-abs entry (infinity norm of the flattened values).
double max_abs(std::span<const double> v) noexcept;

double dot(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace kmesn
