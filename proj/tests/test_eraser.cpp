#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scrubkit/eraser.hpp"
#include "scrubkit/errors.hpp"
#include "test_util.hpp"

using namespace scrubkit;
using namespace scrubkit::testing;

namespace {

// Gauss-Jordan inverse with partial pivoting; fine for the small, well
// conditioned matrices used here.
Matrix gj_inverse(Matrix a) {
  const std::size_t n = a.rows();
  Matrix inv = Matrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    for (std::size_t j = 0; j < n; ++j) {
      std::swap(a(c, j), a(piv, j));
      std::swap(inv(c, j), inv(piv, j));
    }
    const double d = a(c, c);
    for (std::size_t j = 0; j < n; ++j) {
      a(c, j) /= d;
      inv(c, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(c, j);
        inv(r, j) -= f * inv(c, j);
      }
    }
  }
  return inv;
}

// For full-rank Σ_XX the eraser is the Σ⁻¹-orthogonal projection onto the
// span of the cross-covariance columns: A = C (Cᵀ Σ⁻¹ C)⁻¹ Cᵀ Σ⁻¹, with C
// the first k−1 columns of Σ_XZ. Computed from plain sums of the data.
Matrix oblique_oracle(const LabeledSet& data) {
  std::vector<std::vector<double>> xs, zs;
  for (std::size_t r = 0; r < data.size(); ++r) {
    xs.emplace_back(data.features.row(r).begin(), data.features.row(r).end());
    std::vector<double> z(data.num_classes - 1, 0.0);
    if (static_cast<std::size_t>(data.labels[r]) < data.num_classes - 1)
      z[static_cast<std::size_t>(data.labels[r])] = 1.0;
    zs.push_back(z);
  }
  const BatchMoments m = batch_moments(xs, zs);
  const Matrix sinv = gj_inverse(m.cov_xx);
  const Matrix c = m.cov_xz;
  const Matrix ct_sinv = naive_mul(naive_transpose(c), sinv);
  return naive_mul(naive_mul(c, gj_inverse(naive_mul(ct_sinv, c))), ct_sinv);
}

LabeledSet toy_2d() {
  LabeledSet s;
  s.append(std::vector<double>{1.0, 0.0}, 0);
  s.append(std::vector<double>{1.0, 2.0}, 0);
  s.append(std::vector<double>{-1.0, 0.0}, 1);
  s.append(std::vector<double>{-1.0, -2.0}, 1);
  return s;
}

std::vector<Vector> class_means(const Matrix& x, const std::vector<int>& labels, std::size_t k) {
  std::vector<Vector> means(k, Vector(x.cols(), 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto y = static_cast<std::size_t>(labels[r]);
    ++counts[y];
    for (std::size_t c = 0; c < x.cols(); ++c) means[y][c] += x(r, c);
  }
  for (std::size_t y = 0; y < k; ++y)
    for (double& v : means[y]) v /= static_cast<double>(counts[y]);
  return means;
}

LabeledSet multiclass(std::uint64_t seed, std::size_t n, std::size_t dim, std::size_t k) {
  Rng rng(seed);
  std::vector<Vector> centers(k, Vector(dim));
  for (auto& c : centers)
    for (double& v : c) v = rng.normal(0.0, 3.0);
  const Matrix mix = random_matrix(rng, dim, dim);
  LabeledSet s;
  s.num_classes = k;
  Vector g(dim), x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = i % k;
    for (double& v : g) v = rng.normal();
    for (std::size_t r = 0; r < dim; ++r) {
      x[r] = centers[y][r] + g[r];
      for (std::size_t c = 0; c < dim; ++c) x[r] += 0.5 * mix(r, c) * g[c];
    }
    s.append(x, static_cast<int>(y));
  }
  return s;
}

}  // namespace

TEST_CASE("two-dimensional example") {
  const LabeledSet data = toy_2d();
  const Eraser e = fit_eraser_on(data);
  // Σ_XX = [[1,1],[1,2]], Σ_XZ = (1/2, 1/2)ᵀ, so A = [[1,0],[1,0]] by hand
  CHECK(max_diff(e.projection(), Matrix{{1.0, 0.0}, {1.0, 0.0}}) <= 1e-10);
  CHECK(max_diff(e.projection(), oblique_oracle(data)) <= 1e-10);
  CHECK(e.rank() == 1);
  const Matrix erased = erase_rows(e, data.features);
  for (const Vector& m : class_means(erased, data.labels, 2)) CHECK(max_diff(m, Vector{0.0, 0.0}) <= 1e-8);
  CHECK(max_diff(erase(e, e.center()), e.center()) <= 1e-15);
}

TEST_CASE("eraser matches the oblique projection oracle") {
  for (std::size_t k : {2u, 3u, 5u}) {
    const LabeledSet data = multiclass(70 + k, 3000, 7, k);
    const Eraser e = fit_eraser_on(data);
    CHECK(e.rank() == k - 1);
    CHECK(max_diff(e.projection(), oblique_oracle(data)) <= 1e-8);
  }
}

TEST_CASE("labels independent of X give the identity eraser") {
  // both classes share identical rows, so Σ_XZ vanishes exactly
  LabeledSet data;
  Rng rng(71);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> x = {rng.normal(), rng.normal(), rng.normal()};
    data.append(x, 0);
    data.append(x, 1);
  }
  const Eraser e = fit_eraser_on(data);
  CHECK(e.rank() == 0);
  CHECK(max_abs(e.projection()) == 0.0);
  CHECK(max_diff(erase_rows(e, data.features), data.features) == 0.0);
}

TEST_CASE("isotropic data gives the orthogonal projector onto the mean difference") {
  const LabeledSet data = gaussian_blobs(72, 40000, 6, 3.0);
  const Eraser e = fit_eraser_on(data);
  const auto means = class_means(data.features, data.labels, 2);
  Vector v(6);
  for (std::size_t i = 0; i < 6; ++i) v[i] = means[1][i] - means[0][i];
  const double vv = dot(v, v);
  Matrix expect(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) expect(i, j) = v[i] * v[j] / vv;
  CHECK(fro(e.projection() - expect) <= 0.05);
}

TEST_CASE("idempotence, coalescence, refit nullity and rank bound") {
  for (std::size_t k : {2u, 4u}) {
    const LabeledSet data = multiclass(80 + k, 2000, 9, k);
    const Eraser e = fit_eraser_on(data);
    const Matrix& a = e.projection();
    CHECK(max_diff(naive_mul(a, a), a) <= 1e-6);
    CHECK(e.rank() <= k - 1);

    const Matrix once = erase_rows(e, data.features);
    CHECK(max_diff(erase_rows(e, once), once) <= 1e-6);

    const auto means = class_means(once, data.labels, k);
    Vector global(9, 0.0);
    for (std::size_t r = 0; r < once.rows(); ++r)
      for (std::size_t c = 0; c < 9; ++c) global[c] += once(r, c) / static_cast<double>(once.rows());
    const double scale = 1.0 + norm2(global);
    for (const Vector& m : means) CHECK(max_diff(m, global) <= 1e-6 * scale);

    LabeledSet erased = data;
    erased.features = once;
    const Eraser again = fit_eraser_on(erased);
    CHECK(frobenius_norm(again.projection()) <= 1e-5);
  }
}

TEST_CASE("erase_sequence is frame-wise") {
  Rng rng(73);
  const Eraser e = fit_eraser_on(multiclass(74, 500, 5, 2));
  const EmbeddingSequence seq{"u", 2, random_matrix(rng, 5, 5)};
  const EmbeddingSequence out = erase_sequence(e, seq);
  CHECK(out.utterance_id == "u");
  CHECK(out.layer == 2);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto row = out.frames.row(r);
    CHECK(max_diff(erase(e, seq.frames.row(r)), Vector(row.begin(), row.end())) <= 1e-12);
  }

  Matrix constant(4, 5);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) constant(r, c) = e.center()[c];
  CHECK(max_diff(erase_sequence(e, EmbeddingSequence{"c", 0, constant}).frames, constant) <= 1e-12);
  CHECK_THROWS_AS(erase_sequence(e, EmbeddingSequence{"w", 0, Matrix(3, 4)}), ShapeError);
  CHECK_THROWS_AS(erase(e, Vector(4, 0.0)), ShapeError);
}

TEST_CASE("least damage versus the naive mean-difference projection") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const LabeledSet data = anisotropic_blobs(90 + seed, 1500, 6, 2.0);
    const Eraser e = fit_eraser_on(data);
    const auto means = class_means(data.features, data.labels, 2);
    Vector u(6), mu(6, 0.0);
    for (std::size_t i = 0; i < 6; ++i) u[i] = means[1][i] - means[0][i];
    const double nu = norm2(u);
    for (double& v : u) v /= nu;
    for (std::size_t r = 0; r < data.size(); ++r)
      for (std::size_t c = 0; c < 6; ++c) mu[c] += data.features(r, c) / static_cast<double>(data.size());

    const Matrix leace = erase_rows(e, data.features);
    double leace_damage = 0.0, naive_damage = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) {
      double proj = 0.0;
      for (std::size_t c = 0; c < 6; ++c) proj += u[c] * (data.features(r, c) - mu[c]);
      for (std::size_t c = 0; c < 6; ++c) {
        naive_damage += proj * u[c] * proj * u[c];
        const double d = data.features(r, c) - leace(r, c);
        leace_damage += d * d;
      }
    }
    CHECK(leace_damage <= naive_damage * (1.0 + 1e-9));
  }
}

TEST_CASE("guardedness on blobs") {
  const LabeledSet blobs = gaussian_blobs(75, 1000, 8, 6.0);
  const Eraser e = fit_eraser_on(blobs);
  CHECK(guardedness_check(e, blobs) <= 0.55);
  CHECK(guardedness_check(Eraser::identity(8), blobs) >= 0.95);
  const double shuffled = guardedness_check(Eraser::identity(8), with_shuffled_labels(blobs, 4));
  CHECK(shuffled >= 0.45);
  CHECK(shuffled <= 0.55 + 0.05);  // best of three seeds skews upward

  LabeledSet single;
  for (int i = 0; i < 20; ++i) single.append(std::vector<double>{double(i), 0.0}, 1);
  CHECK_THROWS_AS(guardedness_check(Eraser::identity(2), single), InsufficientDataError);
}

TEST_CASE("fit preconditions") {
  MomentAccumulator acc(3, 2);
  CHECK_THROWS_AS(fit_eraser(acc), InsufficientDataError);
  acc.update(std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(fit_eraser(acc), InsufficientDataError);
  CHECK_THROWS(LabelEncoding({"Female"}));
  CHECK_THROWS(LabelEncoding({"Male", "Male"}));
  const LabelEncoding enc({"Female", "Male"});
  CHECK(enc.encode("Male") == Vector{0.0, 1.0});
  CHECK_THROWS(enc.encode("Other"));
}

TEST_CASE("eraser file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "scrubkit_test_eraser";
  std::filesystem::create_directories(dir);
  MomentAccumulator acc(4, 2);
  const LabeledSet data = multiclass(76, 300, 4, 2);
  for (std::size_t r = 0; r < data.size(); ++r) acc.update(data.features.row(r), LabelEncoding({"F", "M"}).encode(data.labels[r]));
  const Eraser e = fit_eraser(acc, {}, {"F", "M"});
  const auto path = dir / "layer0.eraser";
  save_eraser(e, path);
  const Eraser back = load_eraser(path);
  CHECK(back.projection() == e.projection());
  CHECK(back.center() == e.center());
  CHECK(back.rank() == e.rank());
  CHECK(back.classes() == std::vector<std::string>{"F", "M"});
  CHECK(back.fit_count() == 300);

  // truncate and expect a typed error
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 5);
  try {
    load_eraser(path);
    FAIL("expected a format error");
  } catch (const FormatError& err) {
    CHECK(err.kind() == FormatErrorKind::kTruncated);
  }
  std::filesystem::remove_all(dir);
}
