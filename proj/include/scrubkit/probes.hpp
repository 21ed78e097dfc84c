#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "scrubkit/dataset.hpp"
#include "scrubkit/matrix.hpp"

namespace scrubkit {

/// Hyperparameters shared by both probe kinds.
///
/// Training stops once the epoch-average loss has failed to improve on the
/// best loss so far by a relative `tol` for `patience` consecutive epochs,
/// or after `max_epochs`.
struct ProbeConfig {
  double tol = 1e-4;
  int patience = 5;
  int max_epochs = 1000;
  double l2 = 1e-4;

  // Linear probe: plain per-sample SGD with step eta0 / (1 + eta0·l2·t).
  double linear_eta0 = 0.05;

  // MLP probe: mini-batch SGD with momentum.
  std::size_t hidden_units = 100;
  double mlp_learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;

  std::vector<std::uint64_t> seeds = {0, 1, 2};
};

/// Per-feature affine standardization fitted on training rows.
struct Standardizer {
  Vector mean;
  Vector scale;  // 1/std, or 1 where std is zero

  static Standardizer fit(const Matrix& x);
  Vector apply(std::span<const double> x) const;
  Matrix apply(const Matrix& x) const;
};

struct TrainingMeta {
  int epochs = 0;
  double final_loss = 0.0;
  bool converged = false;
};

/// Multinomial logistic regression trained by SGD.
struct LinearProbe {
  Standardizer standardizer;
  Matrix weights;  // k × H
  Vector bias;     // k
  std::uint64_t seed = 0;
  TrainingMeta meta;

  std::size_t num_classes() const noexcept { return bias.size(); }
  int predict(std::span<const double> x) const;
  std::vector<int> predict(const Matrix& x) const;
};

/// One hidden layer of rectified units with a softmax output.
struct MlpProbe {
  Standardizer standardizer;
  Matrix hidden_weights;  // H × units
  Vector hidden_bias;     // units
  Matrix output_weights;  // units × k
  Vector output_bias;     // k
  std::uint64_t seed = 0;
  TrainingMeta meta;

  std::size_t num_classes() const noexcept { return output_bias.size(); }
  int predict(std::span<const double> x) const;
  std::vector<int> predict(const Matrix& x) const;
};

LinearProbe train_linear_probe(const LabeledSet& train, std::uint64_t seed, const ProbeConfig& cfg = {});
MlpProbe train_mlp_probe(const LabeledSet& train, std::uint64_t seed, const ProbeConfig& cfg = {});

/// Unweighted mean of per-class F1 over the classes occurring in either
/// vector. A class with no true and no predicted rows does not count.
double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted);

double evaluate_probe(const LinearProbe& probe, const LabeledSet& test);
double evaluate_probe(const MlpProbe& probe, const LabeledSet& test);

enum class ProbeKind { kLinear, kMlp };
const char* to_string(ProbeKind kind);

/// Scores of one probe configuration over several seeds.
struct ProbeReport {
  ProbeKind kind = ProbeKind::kLinear;
  std::vector<std::uint64_t> seeds;
  std::vector<double> scores;  // macro-F1 per seed
  double mean = 0.0;
  double std = 0.0;  // population std over seeds
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  /// Expected macro-F1 of guessing labels at random with the test priors,
  /// which is 1/k for k classes present in the test split.
  double chance_level = 0.0;
  /// Macro-F1 of always predicting the test split's majority class.
  double majority_baseline = 0.0;

  nlohmann::json to_json() const;
};

/// Macro-F1 of predicting the most frequent label for every row; p/(1+p)
/// for two classes with majority share p.
double majority_baseline_f1(const std::vector<int>& labels);

/// Trains one probe per configured seed on `train`, scores each on `test`.
/// Rejects speaker overlap between the splits with DataLeakError.
ProbeReport run_probe_suite(const LabeledSet& train, const LabeledSet& test, ProbeKind kind,
                            const ProbeConfig& cfg = {});

}  // namespace scrubkit
