#include <doctest.h>

#include "scrubkit/errors.hpp"
#include "scrubkit/linalg.hpp"
#include "test_util.hpp"

using namespace scrubkit;
using namespace scrubkit::testing;

namespace {

constexpr double kRtol = 1e-12;

// PSD matrix of the given rank: AᵀA with A rank×n.
Matrix random_psd(Rng& rng, std::size_t n, std::size_t rank) {
  const Matrix a = random_matrix(rng, rank, n);
  return naive_mul(naive_transpose(a), a);
}

bool is_orthogonal_projector(const Matrix& p, double tol) {
  return max_diff(p, naive_transpose(p)) <= tol && max_diff(naive_mul(p, p), p) <= tol;
}

}  // namespace

TEST_CASE("symmetric_eigen reconstructs random symmetric matrices") {
  Rng rng(11);
  for (std::size_t n : {1u, 2u, 3u, 7u, 32u, 65u}) {
    const Matrix a = random_matrix(rng, n, n);
    const Matrix s = symmetrize(a);
    const auto eig = linalg::symmetric_eigen(s);
    Matrix d = Matrix::diagonal(eig.values);
    const Matrix back = naive_mul(naive_mul(eig.vectors, d), naive_transpose(eig.vectors));
    CHECK(max_diff(back, s) <= 1e-10 * (1.0 + fro(s)));
    const Matrix vtv = naive_mul(naive_transpose(eig.vectors), eig.vectors);
    CHECK(max_diff(vtv, Matrix::identity(n)) <= 1e-10);
    for (std::size_t i = 1; i < n; ++i) CHECK(eig.values[i - 1] <= eig.values[i]);
  }
}

TEST_CASE("svd reconstructs rectangular matrices") {
  Rng rng(12);
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{5, 3}, {3, 5}, {1, 4}, {20, 20}, {40, 2}}) {
    const Matrix a = random_matrix(rng, r, c);
    const auto d = linalg::svd(a);
    Matrix us = d.u;
    for (std::size_t i = 0; i < us.rows(); ++i)
      for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= d.s[j];
    CHECK(max_diff(naive_mul(us, naive_transpose(d.v)), a) <= 1e-11 * (1.0 + fro(a)));
    for (std::size_t i = 1; i < d.s.size(); ++i) CHECK(d.s[i - 1] >= d.s[i]);
  }
}

TEST_CASE("psd_sqrt_pinv examples") {
  SUBCASE("identity maps to identity") {
    CHECK(max_diff(linalg::psd_sqrt_pinv(Matrix::identity(3), kRtol), Matrix::identity(3)) <= 1e-14);
  }
  SUBCASE("diag(4, 9, 0) -> diag(1/2, 1/3, 0)") {
    const std::vector<double> diag = {4.0, 9.0, 0.0};
    const std::vector<double> expect = {0.5, 1.0 / 3.0, 0.0};
    CHECK(max_diff(linalg::psd_sqrt_pinv(Matrix::diagonal(diag), kRtol), Matrix::diagonal(expect)) <= 1e-14);
  }
  SUBCASE("R m R is an orthogonal projector onto range(m)") {
    Rng rng(13);
    for (std::size_t rank : {1u, 3u, 6u}) {
      const Matrix m = random_psd(rng, 6, rank);
      const Matrix r = linalg::psd_sqrt_pinv(m, 1e-10);
      const Matrix p = naive_mul(naive_mul(r, m), naive_transpose(r));
      CHECK(is_orthogonal_projector(p, 1e-8));
      CHECK(max_diff(naive_mul(p, m), m) <= 1e-8 * fro(m));
      CHECK(std::abs(fro(p) * fro(p) - static_cast<double>(rank)) <= 1e-8);
    }
  }
  SUBCASE("psd_sqrt squares back to m") {
    Rng rng(14);
    const Matrix m = random_psd(rng, 8, 5);
    const Matrix root = linalg::psd_sqrt(m, 1e-10);
    CHECK(max_diff(naive_mul(root, root), m) <= 1e-9 * fro(m));
  }
}

TEST_CASE("psd_sqrt_pinv rejects bad input") {
  CHECK_THROWS_AS(linalg::psd_sqrt_pinv(Matrix{{1.0, 0.0}, {0.0, -1.0}}, 1e-12), NotPsdError);
  Matrix nan(2, 2);
  nan(0, 1) = std::nan("");
  CHECK_THROWS_AS(linalg::psd_sqrt_pinv(nan, 1e-12), NonFiniteError);
  // tiny negative eigenvalue within tolerance is treated as zero
  CHECK_NOTHROW(linalg::psd_sqrt_pinv(Matrix{{1.0, 0.0}, {0.0, -1e-14}}, 1e-12));
}

TEST_CASE("pinv examples") {
  CHECK(max_diff(linalg::pinv(Matrix{{2.0, 0.0}, {0.0, 4.0}}, kRtol), Matrix{{0.5, 0.0}, {0.0, 0.25}}) <= 1e-15);
  CHECK(max_diff(linalg::pinv(Matrix{{1.0, 1.0}, {1.0, 1.0}}, kRtol), Matrix{{0.25, 0.25}, {0.25, 0.25}}) <= 1e-15);
  CHECK(max_diff(linalg::pinv(Matrix(3, 2), kRtol), Matrix(2, 3)) == 0.0);
}

TEST_CASE("pinv satisfies the four Penrose conditions") {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = 1 + rng.below(7), c = 1 + rng.below(7);
    const std::size_t rank = 1 + rng.below(std::min(r, c));
    const Matrix a = naive_mul(random_matrix(rng, r, rank), random_matrix(rng, rank, c));
    const Matrix p = linalg::pinv(a, 1e-10);
    const double scale = 1.0 + fro(a);
    const double pscale = 1.0 + fro(p);
    CHECK(max_diff(naive_mul(naive_mul(a, p), a), a) <= 1e-8 * scale);
    CHECK(max_diff(naive_mul(naive_mul(p, a), p), p) <= 1e-8 * pscale);
    const Matrix ap = naive_mul(a, p), pa = naive_mul(p, a);
    CHECK(max_diff(ap, naive_transpose(ap)) <= 1e-8);
    CHECK(max_diff(pa, naive_transpose(pa)) <= 1e-8);
  }
}

TEST_CASE("pinv of the whitening matrix equals the matrix square root") {
  Rng rng(16);
  const Matrix m = random_psd(rng, 7, 4);
  const auto w = linalg::whitening(m, 1e-10);
  CHECK(w.rank == 4);
  CHECK(max_diff(linalg::pinv(w.whiten, 1e-10), w.unwhiten) <= 1e-8 * (1.0 + fro(w.unwhiten)));
}

TEST_CASE("colspace_projector examples and invariants") {
  CHECK(max_diff(linalg::colspace_projector(Matrix{{1.0}, {0.0}}, kRtol), Matrix{{1.0, 0.0}, {0.0, 0.0}}) <= 1e-15);
  CHECK(max_diff(linalg::colspace_projector(Matrix{{1.0}, {1.0}}, kRtol), Matrix{{0.5, 0.5}, {0.5, 0.5}}) <= 1e-15);
  Rng rng(17);
  const Matrix full = random_matrix(rng, 5, 5);
  CHECK(max_diff(linalg::colspace_projector(full, kRtol), Matrix::identity(5)) <= 1e-10);

  for (int trial = 0; trial < 10; ++trial) {
    const Matrix m = naive_mul(random_matrix(rng, 6, 2), random_matrix(rng, 2, 3));
    const Matrix p = linalg::colspace_projector(m, 1e-10);
    CHECK(is_orthogonal_projector(p, 1e-8));
    CHECK(max_diff(naive_mul(p, m), m) <= 1e-8 * (1.0 + fro(m)));
    CHECK(linalg::rank(m, 1e-10) == 2);
  }
}
