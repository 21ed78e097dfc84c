#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version in
// `scrubkit::kernels` and a plain single-threaded reference in
// `scrubkit::kernels::serial` that the tests compare against.

#include <span>

#include "scrubkit/matrix.hpp"

namespace scrubkit::kernels {

/// Centered second moments of one block of rows.
struct BlockMoments {
  std::size_t n = 0;
  Vector mean_x;
  Vector mean_z;
  Matrix comoment_xx;  // Σ (x-x̄)(x-x̄)ᵀ
  Matrix comoment_xz;  // Σ (x-x̄)(z-z̄)ᵀ
  Matrix comoment_zz;  // Σ (z-z̄)(z-z̄)ᵀ
};

Matrix matmul(const Matrix& a, const Matrix& b);

/// Two-pass centered moments of the rows of x (n×H) paired with z (n×k).
BlockMoments block_moments(const Matrix& x, const Matrix& z);

/// Folds b into a (pairwise update of means and centered sums). Exact in
/// real arithmetic; the result equals the moments of the concatenated rows.
void merge_moments(BlockMoments& a, const BlockMoments& b);

/// out_i = x_i − A (x_i − center) for every row.
Matrix affine_erase_rows(const Matrix& x, const Matrix& projection, std::span<const double> center);

/// Column means of x (rows ≥ 1).
Vector column_means(const Matrix& x);

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b);
BlockMoments block_moments(const Matrix& x, const Matrix& z);
Matrix affine_erase_rows(const Matrix& x, const Matrix& projection, std::span<const double> center);
Vector column_means(const Matrix& x);

}  // namespace serial

/// Threads OpenMP will use (1 when built without OpenMP).
int max_threads();

}  // namespace scrubkit::kernels
