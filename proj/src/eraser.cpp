#include "scrubkit/eraser.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "scrubkit/binary_io.hpp"
#include "scrubkit/errors.hpp"
#include "scrubkit/kernels.hpp"
#include "scrubkit/linalg.hpp"

namespace scrubkit {
namespace {

bool looks_one_hot(const MomentAccumulator& acc) {
  if (acc.z_dim() < 2) return false;
  double sum = 0.0;
  for (double v : acc.mean_z()) sum += v;
  return std::abs(sum - 1.0) < 1e-9;
}

Matrix drop_last_column(const Matrix& m) {
  Matrix out(m.rows(), m.cols() - 1);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c + 1 < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

}  // namespace

LabelEncoding::LabelEncoding(std::vector<std::string> classes) : classes_(std::move(classes)) {
  if (classes_.size() < 2) throw Error("LabelEncoding: need at least two classes");
  if (std::set<std::string>(classes_.begin(), classes_.end()).size() != classes_.size())
    throw Error("LabelEncoding: class names must be distinct");
}

int LabelEncoding::index_of(const std::string& name) const {
  auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) throw Error("unknown class '" + name + "'");
  return static_cast<int>(it - classes_.begin());
}

Vector LabelEncoding::encode(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= classes_.size())
    throw Error("LabelEncoding: class index " + std::to_string(index) + " out of range");
  Vector v(classes_.size(), 0.0);
  v[static_cast<std::size_t>(index)] = 1.0;
  return v;
}

Eraser::Eraser(Vector center, Matrix projection, std::size_t rank, double rank_rtol, std::size_t fit_count,
               std::vector<std::string> classes)
    : center_(std::move(center)),
      projection_(std::move(projection)),
      rank_(rank),
      rank_rtol_(rank_rtol),
      fit_count_(fit_count),
      classes_(std::move(classes)) {
  if (projection_.rows() != center_.size() || projection_.cols() != center_.size())
    throw ShapeError("Eraser: projection must be H×H with H = center length");
}

Eraser Eraser::identity(std::size_t dim, std::vector<std::string> classes) {
  return Eraser(Vector(dim, 0.0), Matrix(dim, dim), 0, 0.0, 0, std::move(classes));
}

Eraser fit_eraser(const MomentAccumulator& acc, const EraserOptions& opts, std::vector<std::string> classes) {
  if (acc.count() < 2)
    throw InsufficientDataError("fit_eraser: need at least 2 samples, got " + std::to_string(acc.count()));
  const std::size_t h = acc.x_dim();
  const double rtol = opts.rank_rtol >= 0.0 ? opts.rank_rtol : linalg::default_rank_rtol(h, acc.z_dim());

  Matrix cov_xz = acc.covariance_xz();
  Matrix cov_zz = acc.covariance_zz();
  if (looks_one_hot(acc)) {
    cov_xz = drop_last_column(cov_xz);
    Matrix reduced(cov_zz.rows() - 1, cov_zz.cols() - 1);
    for (std::size_t i = 0; i + 1 < cov_zz.rows(); ++i)
      for (std::size_t j = 0; j + 1 < cov_zz.cols(); ++j) reduced(i, j) = cov_zz(i, j);
    cov_zz = std::move(reduced);
  }

  const linalg::Whitening w = linalg::whitening(acc.covariance_xx(), rtol);
  const Matrix whitened_xz = matmul(w.whiten, cov_xz);  // H × k'

  double z_scale = 0.0;
  if (!cov_zz.empty()) {
    const auto eig = linalg::symmetric_eigen(cov_zz);
    z_scale = std::sqrt(std::max(0.0, eig.values.back()));
  }

  Matrix proj(h, h);
  std::size_t rank = 0;
  if (!whitened_xz.empty()) {
    const linalg::Svd d = linalg::svd(whitened_xz);
    const double cutoff = std::max(rtol * d.s.front(), opts.null_tol * z_scale);
    for (std::size_t p = 0; p < d.s.size(); ++p) {
      if (!(d.s[p] > cutoff)) continue;
      ++rank;
      for (std::size_t i = 0; i < h; ++i) {
        const double ui = d.u(i, p);
        for (std::size_t j = 0; j < h; ++j) proj(i, j) += ui * d.u(j, p);
      }
    }
  }

  Matrix a = rank == 0 ? Matrix(h, h) : matmul(matmul(w.unwhiten, proj), w.whiten);
  return Eraser(acc.mean_x(), std::move(a), rank, rtol, acc.count(), std::move(classes));
}

Vector erase(const Eraser& e, std::span<const double> x) {
  if (x.size() != e.dim())
    throw ShapeError("erase: vector has " + std::to_string(x.size()) + " dims, eraser expects " +
                     std::to_string(e.dim()));
  Vector out(x.begin(), x.end());
  Vector d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - e.center()[i];
  for (std::size_t i = 0; i < x.size(); ++i) out[i] -= dot(e.projection().row(i), d);
  return out;
}

Matrix erase_rows(const Eraser& e, const Matrix& x) {
  if (x.cols() != e.dim())
    throw ShapeError("erase: rows have " + std::to_string(x.cols()) + " dims, eraser expects " +
                     std::to_string(e.dim()));
  return kernels::affine_erase_rows(x, e.projection(), e.center());
}

EmbeddingSequence erase_sequence(const Eraser& e, const EmbeddingSequence& seq) {
  return EmbeddingSequence{seq.utterance_id, seq.layer, erase_rows(e, seq.frames)};
}

Eraser fit_eraser_on(const LabeledSet& data, const EraserOptions& opts) {
  if (data.features.rows() != data.size()) throw ShapeError("fit_eraser_on: features/labels misaligned");
  MomentAccumulator acc(data.dim(), data.num_classes);
  Matrix z(data.size(), data.num_classes);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const int y = data.labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= data.num_classes) throw Error("fit_eraser_on: label out of range");
    z(r, static_cast<std::size_t>(y)) = 1.0;
  }
  acc.update_rows(data.features, z);
  return fit_eraser(acc, opts);
}

double guardedness_check(const Eraser& e, const LabeledSet& data, const ProbeConfig& cfg) {
  if (distinct_labels(data.labels) < 2)
    throw InsufficientDataError("guardedness_check: data holds a single class");
  const Matrix erased = erase_rows(e, data.features);

  LabeledSet first, second;
  first.num_classes = second.num_classes = data.num_classes;
  std::map<int, std::size_t> seen;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const int y = data.labels[r];
    ((seen[y]++ % 2 == 0) ? first : second).append(erased.row(r), y);
  }
  double best = 0.0;
  for (auto seed : cfg.seeds) best = std::max(best, evaluate_probe(train_linear_probe(first, seed, cfg), second));
  return best;
}

void save_eraser(const Eraser& e, const std::filesystem::path& path) {
  const std::size_t h = e.dim();
  nlohmann::json header = {{"kind", "eraser"},
                           {"H", h},
                           {"k", e.classes().size()},
                           {"classes", e.classes()},
                           {"rank", e.rank()},
                           {"rtol", e.rank_rtol()},
                           {"n", e.fit_count()}};
  std::vector<io::NamedTensor> tensors;
  tensors.push_back({"center", {h}, e.center()});
  tensors.push_back({"projection", {h, h}, {e.projection().data().begin(), e.projection().data().end()}});
  io::write_tensor_file(path, std::move(header), tensors);
}

Eraser load_eraser(const std::filesystem::path& path) {
  const io::TensorFile file = io::read_tensor_file(path);
  if (file.header.value("kind", "") != "eraser")
    throw FormatError(FormatErrorKind::kMalformed, path.string() + " does not hold an eraser");
  const auto h = file.header.at("H").get<std::size_t>();
  const auto& center = file.get("center");
  const auto& proj = file.get("projection");
  if (center.shape != std::vector<std::size_t>{h} || proj.shape != std::vector<std::size_t>{h, h})
    throw FormatError(FormatErrorKind::kMalformed, path.string() + ": tensor shapes disagree with H");
  return Eraser(center.values, io::to_matrix(proj), file.header.at("rank").get<std::size_t>(),
                file.header.at("rtol").get<double>(), file.header.value("n", std::size_t{0}),
                file.header.value("classes", std::vector<std::string>{}));
}

}  // namespace scrubkit
