#pragma once

// Generators and brute-force oracles shared by the test binaries. Nothing in
// here calls into the code paths it is used to check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "scrubkit/dataset.hpp"
#include "scrubkit/matrix.hpp"
#include "scrubkit/random.hpp"

namespace scrubkit::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sd = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal(0.0, sd);
  return m;
}

inline Matrix naive_transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

inline Matrix naive_mul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t p = 0; p < a.cols(); ++p) s += static_cast<long double>(a(i, p)) * b(p, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

inline double max_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

inline double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline double fro(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

/// Two-pass batch moments in long double: the oracle for streaming updates.
struct BatchMoments {
  std::vector<double> mean_x, mean_z;
  Matrix cov_xx, cov_xz;  // population
};

inline BatchMoments batch_moments(const std::vector<std::vector<double>>& xs,
                                  const std::vector<std::vector<double>>& zs) {
  const std::size_t n = xs.size(), h = xs.front().size(), k = zs.front().size();
  std::vector<long double> mx(h, 0.0L), mz(k, 0.0L);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < h; ++i) mx[i] += xs[s][i];
    for (std::size_t i = 0; i < k; ++i) mz[i] += zs[s][i];
  }
  for (auto& v : mx) v /= n;
  for (auto& v : mz) v /= n;
  std::vector<long double> cxx(h * h, 0.0L), cxz(h * k, 0.0L);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < h; ++i) {
      const long double di = xs[s][i] - mx[i];
      for (std::size_t j = 0; j < h; ++j) cxx[i * h + j] += di * (xs[s][j] - mx[j]);
      for (std::size_t j = 0; j < k; ++j) cxz[i * k + j] += di * (zs[s][j] - mz[j]);
    }
  BatchMoments out;
  out.mean_x.assign(mx.begin(), mx.end());
  out.mean_z.assign(mz.begin(), mz.end());
  out.cov_xx = Matrix(h, h);
  out.cov_xz = Matrix(h, k);
  for (std::size_t i = 0; i < h * h; ++i) out.cov_xx.data()[i] = static_cast<double>(cxx[i] / n);
  for (std::size_t i = 0; i < h * k; ++i) out.cov_xz.data()[i] = static_cast<double>(cxz[i] / n);
  return out;
}

/// Two Gaussian classes in `dim` dims whose means differ by `separation`
/// standard deviations along a random unit direction. Labels alternate.
inline LabeledSet gaussian_blobs(std::uint64_t seed, std::size_t n, std::size_t dim, double separation,
                                 double sd = 1.0) {
  Rng rng(seed);
  std::vector<double> dir(dim);
  double nrm = 0.0;
  for (double& v : dir) {
    v = rng.normal();
    nrm += v * v;
  }
  for (double& v : dir) v /= std::sqrt(nrm);
  LabeledSet set;
  set.num_classes = 2;
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    const double shift = (y == 0 ? -0.5 : 0.5) * separation * sd;
    for (std::size_t d = 0; d < dim; ++d) x[d] = rng.normal(0.0, sd) + shift * dir[d];
    set.append(x, y);
  }
  return set;
}

/// Gaussian classes with a random full-rank (anisotropic) covariance.
inline LabeledSet anisotropic_blobs(std::uint64_t seed, std::size_t n, std::size_t dim, double separation) {
  Rng rng(seed);
  Matrix mix = random_matrix(rng, dim, dim);
  for (std::size_t i = 0; i < dim; ++i) mix(i, i) += 0.5 + 3.0 * rng.uniform();
  std::vector<double> delta(dim);
  for (double& v : delta) v = rng.normal();
  LabeledSet set;
  set.num_classes = 2;
  std::vector<double> g(dim), x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    for (double& v : g) v = rng.normal();
    for (std::size_t r = 0; r < dim; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) s += mix(r, c) * g[c];
      x[r] = s + (y == 0 ? -0.5 : 0.5) * separation * delta[r];
    }
    set.append(x, y);
  }
  return set;
}

/// XOR arrangement in 2-D: label = sign(x·y) > 0, clusters at (±c, ±c).
inline LabeledSet xor_data(std::uint64_t seed, std::size_t n, double c = 2.0, double sd = 0.5) {
  Rng rng(seed);
  LabeledSet set;
  set.num_classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const double sx = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double sy = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const std::vector<double> x = {sx * c + rng.normal(0.0, sd), sy * c + rng.normal(0.0, sd)};
    set.append(x, sx * sy > 0 ? 1 : 0);
  }
  return set;
}

inline LabeledSet with_shuffled_labels(LabeledSet set, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(std::span(set.labels));
  return set;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("scrubkit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace scrubkit::testing
