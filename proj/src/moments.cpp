#include "scrubkit/moments.hpp"

#include <cmath>
#include <string>

#include "scrubkit/errors.hpp"

namespace scrubkit {
namespace {

bool finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

MomentAccumulator::MomentAccumulator(std::size_t x_dim, std::size_t z_dim) {
  m_.mean_x.assign(x_dim, 0.0);
  m_.mean_z.assign(z_dim, 0.0);
  m_.comoment_xx = Matrix(x_dim, x_dim);
  m_.comoment_xz = Matrix(x_dim, z_dim);
  m_.comoment_zz = Matrix(z_dim, z_dim);
}

void MomentAccumulator::check_dims(std::size_t x, std::size_t z, const char* what) const {
  if (x != x_dim() || z != z_dim()) {
    throw ShapeError(std::string(what) + ": got (" + std::to_string(x) + ", " + std::to_string(z) +
                     "), accumulator is (" + std::to_string(x_dim()) + ", " + std::to_string(z_dim()) + ")");
  }
}

void MomentAccumulator::update(std::span<const double> x, std::span<const double> z) {
  check_dims(x.size(), z.size(), "moment_update");
  if (!finite(x) || !finite(z)) throw NonFiniteError("moment_update: non-finite sample");
  const std::size_t h = x_dim();
  const std::size_t k = z_dim();
  m_.n += 1;
  const double n = static_cast<double>(m_.n);

  // δ_old = x − mean_old; mean_new = mean_old + δ_old/n;
  // C += δ_old (x − mean_new)ᵀ, which equals (n−1)/n · δ_old δ_oldᵀ.
  Vector dx(h), dz(k);
  for (std::size_t i = 0; i < h; ++i) dx[i] = x[i] - m_.mean_x[i];
  for (std::size_t i = 0; i < k; ++i) dz[i] = z[i] - m_.mean_z[i];
  const double w = (n - 1.0) / n;
  for (std::size_t i = 0; i < h; ++i) {
    const double di = w * dx[i];
    if (di == 0.0) continue;
    auto xx = m_.comoment_xx.row(i);
    for (std::size_t j = 0; j < h; ++j) xx[j] += di * dx[j];
    auto xz = m_.comoment_xz.row(i);
    for (std::size_t j = 0; j < k; ++j) xz[j] += di * dz[j];
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) m_.comoment_zz(i, j) += w * dz[i] * dz[j];
  for (std::size_t i = 0; i < h; ++i) m_.mean_x[i] += dx[i] / n;
  for (std::size_t i = 0; i < k; ++i) m_.mean_z[i] += dz[i] / n;
}

void MomentAccumulator::update_rows(const Matrix& x, const Matrix& z) {
  check_dims(x.cols(), z.cols(), "moment_update");
  if (x.rows() != z.rows()) throw ShapeError("moment_update: x and z row counts differ");
  if (x.rows() == 0) return;
  if (!x.all_finite() || !z.all_finite()) throw NonFiniteError("moment_update: non-finite sample");
  kernels::merge_moments(m_, kernels::block_moments(x, z));
}

void MomentAccumulator::update_rows(const Matrix& x, std::span<const double> z) {
  Matrix zs(x.rows(), z.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < z.size(); ++c) zs(r, c) = z[c];
  update_rows(x, zs);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  check_dims(other.x_dim(), other.z_dim(), "moment_merge");
  kernels::merge_moments(m_, other.m_);
}

Matrix MomentAccumulator::covariance_xx() const {
  return m_.n == 0 ? Matrix(x_dim(), x_dim()) : m_.comoment_xx * (1.0 / static_cast<double>(m_.n));
}

Matrix MomentAccumulator::covariance_xz() const {
  return m_.n == 0 ? Matrix(x_dim(), z_dim()) : m_.comoment_xz * (1.0 / static_cast<double>(m_.n));
}

Matrix MomentAccumulator::covariance_zz() const {
  return m_.n == 0 ? Matrix(z_dim(), z_dim()) : m_.comoment_zz * (1.0 / static_cast<double>(m_.n));
}

MomentAccumulator merge(MomentAccumulator a, const MomentAccumulator& b) {
  a.merge(b);
  return a;
}

}  // namespace scrubkit
