#pragma once

#include <cstddef>
#include <span>

#include "scrubkit/kernels.hpp"
#include "scrubkit/matrix.hpp"

namespace scrubkit {

/// Streaming sufficient statistics for (x, z) pairs: count, means and
/// centered co-moment sums Σ(x−x̄)(x−x̄)ᵀ, Σ(x−x̄)(z−z̄)ᵀ, Σ(z−z̄)(z−z̄)ᵀ.
///
/// Sums rather than normalized covariances are stored so that merging two
/// accumulators is exact. Covariances are derived on demand with the
/// population convention (divide by n). Whether n or n−1 is used does not
/// matter for the eraser: the same factor scales Σ_XX and Σ_XZ and cancels
/// in W⁺ P_{WΣ_XZ} W.
///
/// Single-writer value type. To parallelize, shard samples over several
/// accumulators and merge().
class MomentAccumulator {
 public:
  MomentAccumulator() = default;
  MomentAccumulator(std::size_t x_dim, std::size_t z_dim);

  std::size_t x_dim() const noexcept { return m_.mean_x.size(); }
  std::size_t z_dim() const noexcept { return m_.mean_z.size(); }
  std::size_t count() const noexcept { return m_.n; }

  const Vector& mean_x() const noexcept { return m_.mean_x; }
  const Vector& mean_z() const noexcept { return m_.mean_z; }
  const Matrix& comoment_xx() const noexcept { return m_.comoment_xx; }
  const Matrix& comoment_xz() const noexcept { return m_.comoment_xz; }
  const Matrix& comoment_zz() const noexcept { return m_.comoment_zz; }

  /// Welford single-sample update.
  void update(std::span<const double> x, std::span<const double> z);

  /// Adds every row of x (n×H) paired with the same row of z (n×k).
  /// Computes the block's moments with the parallel kernel and merges.
  void update_rows(const Matrix& x, const Matrix& z);

  /// Adds every row of x with the same label vector z.
  void update_rows(const Matrix& x, std::span<const double> z);

  void merge(const MomentAccumulator& other);

  /// Population covariances (zero when n = 0).
  Matrix covariance_xx() const;
  Matrix covariance_xz() const;
  Matrix covariance_zz() const;

 private:
  void check_dims(std::size_t x, std::size_t z, const char* what) const;

  kernels::BlockMoments m_;
};

MomentAccumulator merge(MomentAccumulator a, const MomentAccumulator& b);

}  // namespace scrubkit
