#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "scrubkit/dataset.hpp"
#include "scrubkit/matrix.hpp"
#include "scrubkit/moments.hpp"
#include "scrubkit/pooling.hpp"
#include "scrubkit/probes.hpp"

namespace scrubkit {

/// Ordered class names with one-hot encoding.
class LabelEncoding {
 public:
  explicit LabelEncoding(std::vector<std::string> classes);

  std::size_t size() const noexcept { return classes_.size(); }
  const std::vector<std::string>& classes() const noexcept { return classes_; }

  int index_of(const std::string& name) const;
  Vector encode(int index) const;
  Vector encode(const std::string& name) const { return encode(index_of(name)); }

 private:
  std::vector<std::string> classes_;
};

struct EraserOptions {
  /// Relative eigenvalue cutoff for whitening; negative selects
  /// default_rank_rtol(H, k).
  double rank_rtol = -1.0;
  /// Singular values of the whitened cross-covariance W·Σ_XZ below
  /// null_tol·sqrt(λ_max(Σ_ZZ)) count as zero. W·Σ_XZ is the covariance of
  /// whitened x with z, so its singular values never exceed sqrt(λ_max(Σ_ZZ));
  /// the cutoff is therefore scale free.
  double null_tol = 1e-9;
};

/// Fitted least-squares concept eraser x ↦ x − A(x − μ) with
/// A = W⁺ P W, W = (Σ_XX^{1/2})⁺ and P the orthogonal projector onto the
/// column space of W Σ_XZ. Immutable once built.
class Eraser {
 public:
  Eraser(Vector center, Matrix projection, std::size_t rank, double rank_rtol, std::size_t fit_count,
         std::vector<std::string> classes);

  std::size_t dim() const noexcept { return center_.size(); }
  const Vector& center() const noexcept { return center_; }
  const Matrix& projection() const noexcept { return projection_; }
  std::size_t rank() const noexcept { return rank_; }
  double rank_rtol() const noexcept { return rank_rtol_; }
  std::size_t fit_count() const noexcept { return fit_count_; }
  const std::vector<std::string>& classes() const noexcept { return classes_; }

  /// The identity eraser (A = 0) on H dims.
  static Eraser identity(std::size_t dim, std::vector<std::string> classes = {});

 private:
  Vector center_;
  Matrix projection_;
  std::size_t rank_ = 0;
  double rank_rtol_ = 0.0;
  std::size_t fit_count_ = 0;
  std::vector<std::string> classes_;
};

/// Closed-form fit from accumulated moments. When the accumulated z vectors
/// are one-hot (mean_z sums to one) the last column of Σ_XZ is dropped: the
/// centered one-hot columns sum to zero, so the remaining k−1 span the same
/// space and rank(A) ≤ k−1 holds exactly.
Eraser fit_eraser(const MomentAccumulator& acc, const EraserOptions& opts = {},
                  std::vector<std::string> classes = {});

Vector erase(const Eraser& e, std::span<const double> x);

/// Every row of x erased; rows processed in parallel.
Matrix erase_rows(const Eraser& e, const Matrix& x);

/// Frame-wise erasure; T and metadata unchanged.
EmbeddingSequence erase_sequence(const Eraser& e, const EmbeddingSequence& seq);

/// Erases `data`, splits it alternately per class into halves, trains a
/// linear probe per seed on the first half and returns the best macro-F1 on
/// the second half. Callers compare the result
/// against chance (0.5 for two balanced classes).
double guardedness_check(const Eraser& e, const LabeledSet& data, const ProbeConfig& cfg = {});

/// Convenience: fits an eraser on labeled rows (one-hot labels).
Eraser fit_eraser_on(const LabeledSet& data, const EraserOptions& opts = {});

void save_eraser(const Eraser& e, const std::filesystem::path& path);
Eraser load_eraser(const std::filesystem::path& path);

}  // namespace scrubkit
