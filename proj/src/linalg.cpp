#include "scrubkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scrubkit/errors.hpp"

namespace scrubkit::linalg {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_finite(const Matrix& m, const char* what) {
  if (!m.all_finite()) throw NonFiniteError(std::string(what) + ": non-finite entries");
}

// Householder reduction to tridiagonal form. On return v holds the
// orthogonal transform, d the diagonal and e the subdiagonal in e[1..n-1].
void tridiagonalize(Matrix& v, Vector& d, Vector& e) {
  const std::size_t n = v.rows();
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e), accumulating rotations into v.
void tridiagonal_ql(Matrix& v, Vector& d, Vector& e) {
  const std::size_t n = v.rows();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const std::size_t max_iter = 60 * n + 60;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= kEps * tst1) break;
      ++m;
    }
    if (m == n) m = n - 1;

    if (m > l) {
      std::size_t iter = 0;
      do {
        if (++iter > max_iter) throw Error("symmetric_eigen: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          for (std::size_t k = 0; k < n; ++k) {
            h = v(k, ii + 1);
            v(k, ii + 1) = s * v(k, ii) + c * h;
            v(k, ii) = c * v(k, ii) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kEps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

// V diag(f(λ)) Vᵀ over the kept eigenpairs.
Matrix spectral_function(const SymmetricEigen& eig, const std::vector<double>& weights) {
  const std::size_t n = eig.values.size();
  Matrix out(n, n);
  for (std::size_t p = 0; p < n; ++p) {
    const double w = weights[p];
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = w * eig.vectors(i, p);
      if (vi == 0.0) continue;
      auto row = out.row(i);
      for (std::size_t j = 0; j < n; ++j) row[j] += vi * eig.vectors(j, p);
    }
  }
  return out;
}

}  // namespace

SymmetricEigen symmetric_eigen(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("symmetric_eigen: matrix is not square");
  require_finite(m, "symmetric_eigen");
  const std::size_t n = m.rows();
  SymmetricEigen out;
  if (n == 0) return out;
  out.vectors = symmetrize(m);
  out.values.assign(n, 0.0);
  if (n == 1) {
    out.values[0] = out.vectors(0, 0);
    out.vectors(0, 0) = 1.0;
    return out;
  }
  Vector e(n, 0.0);
  tridiagonalize(out.vectors, out.values, e);
  tridiagonal_ql(out.vectors, out.values, e);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.values[a] < out.values[b]; });
  SymmetricEigen sorted;
  sorted.values.resize(n);
  sorted.vectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    sorted.values[c] = out.values[order[c]];
    for (std::size_t r = 0; r < n; ++r) sorted.vectors(r, c) = out.vectors(r, order[c]);
  }
  return sorted;
}

Svd svd(const Matrix& m) {
  require_finite(m, "svd");
  if (m.rows() < m.cols()) {
    Svd t = svd(m.transpose());
    return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
  }
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  Matrix u = m;
  Matrix v = Matrix::identity(cols);

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          const double up = u(i, p), uq = u(i, q);
          alpha += up * up;
          beta += uq * uq;
          gamma += up * uq;
        }
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double up = u(i, p), uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
        for (std::size_t i = 0; i < cols; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  Vector s(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double nrm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) nrm += u(i, j) * u(i, j);
    s[j] = std::sqrt(nrm);
    if (s[j] > 0.0)
      for (std::size_t i = 0; i < rows; ++i) u(i, j) /= s[j];
  }

  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  Svd out{Matrix(rows, cols), Vector(cols), Matrix(cols, cols)};
  for (std::size_t c = 0; c < cols; ++c) {
    out.s[c] = s[order[c]];
    for (std::size_t r = 0; r < rows; ++r) out.u(r, c) = u(r, order[c]);
    for (std::size_t r = 0; r < cols; ++r) out.v(r, c) = v(r, order[c]);
  }
  return out;
}

double default_rank_rtol(std::size_t h, std::size_t k) {
  return static_cast<double>(std::max<std::size_t>({h, k, 1})) * kEps;
}

Whitening whitening(const Matrix& m, double rank_rtol) {
  const SymmetricEigen eig = symmetric_eigen(m);
  const std::size_t n = eig.values.size();
  Whitening out{Matrix(n, n), Matrix(n, n), 0};
  if (n == 0) return out;
  const double lambda_max = std::max(0.0, eig.values.back());
  const double cutoff = rank_rtol * lambda_max;
  if (eig.values.front() < -cutoff && eig.values.front() < 0.0 && lambda_max > 0.0) {
    throw NotPsdError("psd_sqrt_pinv: eigenvalue " + std::to_string(eig.values.front()) +
                      " is below -rtol*lambda_max");
  }
  std::vector<double> inv_root(n, 0.0), root(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (eig.values[i] > cutoff && eig.values[i] > 0.0) {
      root[i] = std::sqrt(eig.values[i]);
      inv_root[i] = 1.0 / root[i];
      ++out.rank;
    }
  }
  out.whiten = spectral_function(eig, inv_root);
  out.unwhiten = spectral_function(eig, root);
  return out;
}

Matrix psd_sqrt_pinv(const Matrix& m, double rank_rtol) { return whitening(m, rank_rtol).whiten; }

Matrix psd_sqrt(const Matrix& m, double rank_rtol) { return whitening(m, rank_rtol).unwhiten; }

Matrix pinv(const Matrix& m, double rank_rtol) {
  if (m.empty()) return Matrix(m.cols(), m.rows());
  const Svd d = svd(m);
  const double cutoff = rank_rtol * (d.s.empty() ? 0.0 : d.s.front());
  Matrix out(m.cols(), m.rows());
  for (std::size_t p = 0; p < d.s.size(); ++p) {
    if (!(d.s[p] > cutoff) || d.s[p] == 0.0) continue;
    const double inv = 1.0 / d.s[p];
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const double vi = d.v(i, p) * inv;
      for (std::size_t j = 0; j < m.rows(); ++j) out(i, j) += vi * d.u(j, p);
    }
  }
  return out;
}

Matrix colspace_projector(const Matrix& m, double rank_rtol) {
  const std::size_t n = m.rows();
  Matrix out(n, n);
  if (m.empty()) return out;
  const Svd d = svd(m);
  const double cutoff = rank_rtol * (d.s.empty() ? 0.0 : d.s.front());
  for (std::size_t p = 0; p < d.s.size(); ++p) {
    if (!(d.s[p] > cutoff) || d.s[p] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double ui = d.u(i, p);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += ui * d.u(j, p);
    }
  }
  return out;
}

std::size_t rank(const Matrix& m, double rank_rtol) {
  if (m.empty()) return 0;
  const Svd d = svd(m);
  const double cutoff = rank_rtol * d.s.front();
  return static_cast<std::size_t>(
      std::count_if(d.s.begin(), d.s.end(), [&](double s) { return s > cutoff && s > 0.0; }));
}

}  // namespace scrubkit::linalg
