#include "scrubkit/kernels.hpp"

#include <algorithm>

#include "scrubkit/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace scrubkit::kernels {
namespace {

// Rows per shard in the parallel moment kernel. Fixed so that results do not
// depend on the thread count.
constexpr std::size_t kShardRows = 256;

void check_moment_shapes(const Matrix& x, const Matrix& z) {
  if (x.rows() != z.rows()) throw ShapeError("block_moments: x and z row counts differ");
}

// Two-pass moments of rows [begin, end).
BlockMoments moments_of_range(const Matrix& x, const Matrix& z, std::size_t begin, std::size_t end) {
  const std::size_t h = x.cols();
  const std::size_t k = z.cols();
  BlockMoments m;
  m.n = end - begin;
  m.mean_x.assign(h, 0.0);
  m.mean_z.assign(k, 0.0);
  m.comoment_xx = Matrix(h, h);
  m.comoment_xz = Matrix(h, k);
  m.comoment_zz = Matrix(k, k);
  if (m.n == 0) return m;

  for (std::size_t r = begin; r < end; ++r) {
    auto xr = x.row(r);
    auto zr = z.row(r);
    for (std::size_t i = 0; i < h; ++i) m.mean_x[i] += xr[i];
    for (std::size_t i = 0; i < k; ++i) m.mean_z[i] += zr[i];
  }
  const double inv = 1.0 / static_cast<double>(m.n);
  for (double& v : m.mean_x) v *= inv;
  for (double& v : m.mean_z) v *= inv;

  Vector dx(h), dz(k);
  for (std::size_t r = begin; r < end; ++r) {
    auto xr = x.row(r);
    auto zr = z.row(r);
    for (std::size_t i = 0; i < h; ++i) dx[i] = xr[i] - m.mean_x[i];
    for (std::size_t i = 0; i < k; ++i) dz[i] = zr[i] - m.mean_z[i];
    for (std::size_t i = 0; i < h; ++i) {
      const double di = dx[i];
      if (di == 0.0) continue;
      auto row_xx = m.comoment_xx.row(i);
      for (std::size_t j = i; j < h; ++j) row_xx[j] += di * dx[j];
      auto row_xz = m.comoment_xz.row(i);
      for (std::size_t j = 0; j < k; ++j) row_xz[j] += di * dz[j];
    }
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) m.comoment_zz(i, j) += dz[i] * dz[j];
  }
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < i; ++j) m.comoment_xx(i, j) = m.comoment_xx(j, i);
  return m;
}

}  // namespace

void merge_moments(BlockMoments& a, const BlockMoments& b) {
  if (b.n == 0) return;
  if (a.n == 0) {
    a = b;
    return;
  }
  if (a.mean_x.size() != b.mean_x.size() || a.mean_z.size() != b.mean_z.size())
    throw ShapeError("merge_moments: dimension mismatch");
  const double na = static_cast<double>(a.n);
  const double nb = static_cast<double>(b.n);
  const double n = na + nb;
  const double w = na * nb / n;
  const std::size_t h = a.mean_x.size();
  const std::size_t k = a.mean_z.size();

  Vector dx(h), dz(k);
  for (std::size_t i = 0; i < h; ++i) dx[i] = b.mean_x[i] - a.mean_x[i];
  for (std::size_t i = 0; i < k; ++i) dz[i] = b.mean_z[i] - a.mean_z[i];

  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < h; ++j) a.comoment_xx(i, j) += b.comoment_xx(i, j) + w * dx[i] * dx[j];
    for (std::size_t j = 0; j < k; ++j) a.comoment_xz(i, j) += b.comoment_xz(i, j) + w * dx[i] * dz[j];
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) a.comoment_zz(i, j) += b.comoment_zz(i, j) + w * dz[i] * dz[j];

  for (std::size_t i = 0; i < h; ++i) a.mean_x[i] += dx[i] * nb / n;
  for (std::size_t i = 0; i < k; ++i) a.mean_z[i] += dz[i] * nb / n;
  a.n += b.n;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (a.rows() * a.cols() * b.cols() > 32768)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    auto out = c.row(static_cast<std::size_t>(r));
    auto ar = a.row(static_cast<std::size_t>(r));
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double av = ar[p];
      if (av == 0.0) continue;
      auto br = b.row(p);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += av * br[j];
    }
  }
  return c;
}

BlockMoments block_moments(const Matrix& x, const Matrix& z) {
  check_moment_shapes(x, z);
  const std::size_t n = x.rows();
  const std::size_t shards = std::max<std::size_t>(1, (n + kShardRows - 1) / kShardRows);
  if (shards == 1) return moments_of_range(x, z, 0, n);

  std::vector<BlockMoments> parts(shards);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(shards); ++s) {
    const std::size_t begin = static_cast<std::size_t>(s) * kShardRows;
    parts[static_cast<std::size_t>(s)] = moments_of_range(x, z, begin, std::min(n, begin + kShardRows));
  }
  BlockMoments total = std::move(parts.front());
  for (std::size_t s = 1; s < shards; ++s) merge_moments(total, parts[s]);
  return total;
}

Matrix affine_erase_rows(const Matrix& x, const Matrix& projection, std::span<const double> center) {
  const std::size_t h = x.cols();
  if (projection.rows() != h || projection.cols() != h || center.size() != h)
    throw ShapeError("affine_erase_rows: width mismatch");
  // Row axpys against Aᵀ vectorize; the dot-product form does not.
  const Matrix at = projection.transpose();
  Matrix out = x;
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static) if (x.rows() * h * h > 32768)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    auto xr = x.row(static_cast<std::size_t>(r));
    auto o = out.row(static_cast<std::size_t>(r));
    for (std::size_t j = 0; j < h; ++j) {
      const double d = xr[j] - center[j];
      if (d == 0.0) continue;
      auto ar = at.row(j);
      for (std::size_t i = 0; i < h; ++i) o[i] -= d * ar[i];
    }
  }
  return out;
}

Vector column_means(const Matrix& x) {
  if (x.rows() == 0) throw InsufficientDataError("column_means: no rows");
  const std::size_t h = x.cols();
  Vector mean(h, 0.0);
  const auto cols = static_cast<std::ptrdiff_t>(h);
#pragma omp parallel for schedule(static) if (x.rows() * h > 65536)
  for (std::ptrdiff_t c = 0; c < cols; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) s += x(r, static_cast<std::size_t>(c));
    mean[static_cast<std::size_t>(c)] = s / static_cast<double>(x.rows());
  }
  return mean;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

BlockMoments block_moments(const Matrix& x, const Matrix& z) {
  check_moment_shapes(x, z);
  return moments_of_range(x, z, 0, x.rows());
}

Matrix affine_erase_rows(const Matrix& x, const Matrix& projection, std::span<const double> center) {
  const std::size_t h = x.cols();
  if (projection.rows() != h || projection.cols() != h || center.size() != h)
    throw ShapeError("affine_erase_rows: width mismatch");
  Matrix out(x.rows(), h);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t i = 0; i < h; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < h; ++j) s += projection(i, j) * (x(r, j) - center[j]);
      out(r, i) = x(r, i) - s;
    }
  return out;
}

Vector column_means(const Matrix& x) {
  if (x.rows() == 0) throw InsufficientDataError("column_means: no rows");
  Vector mean(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) mean[c] += x(r, c);
  for (double& v : mean) v /= static_cast<double>(x.rows());
  return mean;
}

}  // namespace serial
}  // namespace scrubkit::kernels
