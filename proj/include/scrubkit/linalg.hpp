#pragma once

#include <cstddef>

#include "scrubkit/matrix.hpp"

namespace scrubkit::linalg {

/// Eigenpairs of a symmetric matrix, eigenvalues ascending; eigenvectors are
/// the columns of `vectors`.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

/// Householder tridiagonalization followed by implicit QL iterations.
/// Only the lower triangle is read after symmetrization.
SymmetricEigen symmetric_eigen(const Matrix& m);

/// Thin SVD m = U diag(s) Vᵀ with singular values descending.
/// U is rows×r, V is cols×r with r = min(rows, cols).
struct Svd {
  Matrix u;
  Vector s;
  Matrix v;
};

/// One-sided (Hestenes) Jacobi SVD.
Svd svd(const Matrix& m);

/// Relative rank cutoff used when no explicit one is given:
/// max(h, k) · machine epsilon (multiplied by the largest eigen/singular value).
double default_rank_rtol(std::size_t h, std::size_t k = 1);

/// (m^{1/2})⁺ for symmetric PSD m. Eigenvalues ≤ rank_rtol·λ_max count as zero;
/// an eigenvalue below −rank_rtol·λ_max raises NotPsdError.
Matrix psd_sqrt_pinv(const Matrix& m, double rank_rtol);

/// m^{1/2} restricted to the same support as psd_sqrt_pinv, so that
/// psd_sqrt(m) = pinv(psd_sqrt_pinv(m)).
Matrix psd_sqrt(const Matrix& m, double rank_rtol);

/// Both factors from one eigendecomposition.
struct Whitening {
  Matrix whiten;    // (m^{1/2})⁺
  Matrix unwhiten;  // m^{1/2} on the support
  std::size_t rank = 0;
};
Whitening whitening(const Matrix& m, double rank_rtol);

/// Moore–Penrose pseudoinverse via SVD; singular values ≤ rank_rtol·σ_max
/// are dropped.
Matrix pinv(const Matrix& m, double rank_rtol);

/// Orthogonal projector m·m⁺ onto the column space of m.
Matrix colspace_projector(const Matrix& m, double rank_rtol);

/// Numerical rank with the same cutoff as pinv.
std::size_t rank(const Matrix& m, double rank_rtol);

}  // namespace scrubkit::linalg
