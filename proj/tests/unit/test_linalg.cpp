#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kmesn/errors.hpp"
#include "kmesn/linalg.hpp"
#include "oracles.hpp"

using namespace kmesn;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(b[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return scale == 0.0 ? diff : diff / scale;
}

}  // namespace

TEST_CASE("sparse matrix construction") {
  SUBCASE("triplets are sorted and zeros dropped") {
    auto m = SparseMatrix::from_triplets(2, 3, {{1, 2, 5.0}, {0, 1, 0.0}, {0, 0, -1.0}});
    CHECK(m.nnz() == 2);
    CHECK(m.row_nnz(0) == 1);
    CHECK(m.to_dense()(1, 2) == 5.0);
  }
  SUBCASE("duplicates are rejected") {
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), ConfigError);
  }
  SUBCASE("out of range index") {
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), DimensionError);
  }
  SUBCASE("non-finite value") {
    CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{0, 0, NAN}}), DegenerateInput);
  }
  SUBCASE("dense size mismatch") {
    CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>(3)), DimensionError);
  }
}

TEST_CASE("spmv") {
  SUBCASE("empty matrix gives zeros") {
    SparseMatrix m(3, 3);
    CHECK(spmv(m, std::vector<double>{1, 2, 3}) == std::vector<double>{0, 0, 0});
  }
  SUBCASE("identity") {
    CHECK(spmv(SparseMatrix::identity(2), std::vector<double>{4, -1}) == std::vector<double>{4, -1});
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(spmv(SparseMatrix(2, 3), std::vector<double>{1, 2}), DimensionError);
  }
  SUBCASE("random 20x20 with 10 entries per row matches dense product") {
    const DenseMatrix d = oracle::random_sparse_dense(20, 20, 10, 7);
    const auto m = SparseMatrix::from_dense(d);
    CHECK(m.nnz() == 200);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(20);
    for (double& x : v) x = u(rng);
    CHECK(max_rel_err(spmv(m, v), oracle::dense_matvec(oracle::to_rows(d), v)) < 1e-12);
  }
  SUBCASE("linearity on random trials") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int trial = 0; trial < 20; ++trial) {
      const auto m = SparseMatrix::from_dense(oracle::random_sparse_dense(15, 12, 4, trial));
      std::vector<double> a(12), b(12), comb(12);
      const double ca = u(rng), cb = u(rng);
      for (std::size_t i = 0; i < 12; ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
        comb[i] = ca * a[i] + cb * b[i];
      }
      const auto ma = spmv(m, a), mb = spmv(m, b);
      std::vector<double> expect(15);
      for (std::size_t i = 0; i < 15; ++i) expect[i] = ca * ma[i] + cb * mb[i];
      CHECK(max_rel_err(spmv(m, comb), expect) < 1e-10);
    }
  }
}

TEST_CASE("largest_abs_eigenvalue") {
  SUBCASE("identity") { CHECK(largest_abs_eigenvalue(SparseMatrix::identity(3)) == doctest::Approx(1.0).epsilon(1e-12)); }
  SUBCASE("diagonal") {
    auto m = SparseMatrix::from_triplets(3, 3, {{0, 0, 0.2}, {1, 1, -0.9}, {2, 2, 0.5}});
    CHECK(largest_abs_eigenvalue(m) == doctest::Approx(0.9).epsilon(1e-9));
  }
  SUBCASE("+/- real pair") {
    auto m = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.5}, {1, 1, -1.5}});
    CHECK(largest_abs_eigenvalue(m) == doctest::Approx(1.5).epsilon(1e-9));
  }
  SUBCASE("rotation (complex pair)") {
    const double c = 0.8 * std::cos(0.7), s = 0.8 * std::sin(0.7);
    auto m = SparseMatrix::from_triplets(3, 3, {{0, 0, c}, {0, 1, -s}, {1, 0, s}, {1, 1, c}, {2, 2, 0.3}});
    CHECK(largest_abs_eigenvalue(m) == doctest::Approx(0.8).epsilon(1e-9));
  }
  SUBCASE("random 50x50, 10 per row, seed 3, vs dense eigensolver") {
    const DenseMatrix d = oracle::random_sparse_dense(50, 50, 10, 3);
    const double est = largest_abs_eigenvalue(SparseMatrix::from_dense(d), {.seed = 3});
    CHECK(rel_err(est, oracle::spectral_radius(d)) < 1e-6);
  }
  SUBCASE("many random matrices vs dense eigensolver") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const std::size_t n = seed % 2 == 0 ? 50 : 200;
      const DenseMatrix d = oracle::random_sparse_dense(n, n, 10, 1000 + seed);
      const double est = largest_abs_eigenvalue(SparseMatrix::from_dense(d), {.seed = seed});
      CAPTURE(seed);
      CHECK(rel_err(est, oracle::spectral_radius(d)) < 1e-6);
    }
  }
  SUBCASE("homogeneity under scaling") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto m = SparseMatrix::from_dense(oracle::random_sparse_dense(40, 40, 8, 50 + seed));
      const double base = largest_abs_eigenvalue(m, {.seed = seed});
      for (double c : {-2.0, 0.5, 3.0}) {
        CHECK(rel_err(largest_abs_eigenvalue(m.scaled(c), {.seed = seed}), std::abs(c) * base) < 1e-6);
      }
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(largest_abs_eigenvalue(SparseMatrix(2, 3)), DimensionError);
    CHECK_THROWS_AS(largest_abs_eigenvalue(SparseMatrix(3, 3)), DegenerateSpectrum);
    // strictly upper triangular: nilpotent
    auto nil = SparseMatrix::from_triplets(3, 3, {{0, 1, 1.0}, {1, 2, 1.0}});
    CHECK_THROWS_AS(largest_abs_eigenvalue(nil), DegenerateSpectrum);
    const auto slow = SparseMatrix::from_dense(oracle::random_sparse_dense(30, 30, 5, 1));
    CHECK_THROWS_AS(largest_abs_eigenvalue(slow, {.tol = 1e-15, .max_iter = 2}), DegenerateSpectrum);
  }
}

TEST_CASE("solve_spd") {
  SUBCASE("identity system") {
    const DenseMatrix b = DenseMatrix::from_rows({{1, 2, 3}, {-4, 5, 0.5}});
    CHECK(solve_spd(DenseMatrix::identity(3), b) == b);
  }
  SUBCASE("scaled identity") {
    DenseMatrix g(2, 2);
    g(0, 0) = g(1, 1) = 2.0;
    const DenseMatrix x = solve_spd(g, DenseMatrix::from_rows({{4, 6}}));
    CHECK(x(0, 0) == doctest::Approx(2.0));
    CHECK(x(0, 1) == doctest::Approx(3.0));
  }
  SUBCASE("random 10x10 matches explicit inverse") {
    const DenseMatrix g = oracle::random_spd(10, 5);
    const DenseMatrix b = oracle::random_dense(3, 10, 6);
    const auto inv = oracle::inverse(oracle::to_rows(g));
    const DenseMatrix x = solve_spd(g, b);
    for (std::size_t r = 0; r < 3; ++r) {
      std::vector<double> expect(10, 0.0);
      for (std::size_t j = 0; j < 10; ++j)
        for (std::size_t i = 0; i < 10; ++i) expect[j] += b(r, i) * inv[i][j];
      CHECK(max_rel_err({x.row(r).begin(), x.row(r).end()}, expect) < 1e-9);
    }
  }
  SUBCASE("residual on random systems up to 200x200") {
    for (std::size_t n : {5u, 30u, 100u, 200u}) {
      const DenseMatrix g = oracle::random_spd(n, n);
      const DenseMatrix b = oracle::random_dense(4, n, n + 1);
      const DenseMatrix x = solve_spd(g, b);
      const DenseMatrix back = matmul(x, g);
      double diff = 0.0;
      for (std::size_t i = 0; i < b.values().size(); ++i)
        diff = std::max(diff, std::abs(back.values()[i] - b.values()[i]));
      CAPTURE(n);
      CHECK(diff / max_abs(b.values()) < 1e-8);
    }
  }
  SUBCASE("rank-deficient goes through jitter") {
    DenseMatrix g = DenseMatrix::from_rows({{1, 1}, {1, 1}});
    const DenseMatrix x = solve_spd(g, DenseMatrix::from_rows({{2, 2}}));
    CHECK(x(0, 0) + x(0, 1) == doctest::Approx(2.0).epsilon(1e-6));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(solve_spd(DenseMatrix(2, 3), DenseMatrix(1, 3)), DimensionError);
    CHECK_THROWS_AS(solve_spd(DenseMatrix::identity(2), DenseMatrix(1, 3)), DimensionError);
    CHECK_THROWS_AS(solve_spd(DenseMatrix(2, 2), DenseMatrix(1, 2)), SingularSystem);
    CHECK_THROWS_AS(solve_spd(DenseMatrix::from_rows({{1, 0}, {0, -1}}), DenseMatrix(1, 2)),
                    SingularSystem);
  }
}
