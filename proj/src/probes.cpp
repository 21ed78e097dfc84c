#include "scrubkit/probes.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "scrubkit/errors.hpp"
#include "scrubkit/random.hpp"

namespace scrubkit {
namespace {

void validate_training_set(const LabeledSet& train, const char* what) {
  if (train.size() < 10)
    throw InsufficientDataError(std::string(what) + ": need at least 10 training samples, got " +
                                std::to_string(train.size()));
  if (train.features.rows() != train.size()) throw ShapeError(std::string(what) + ": features/labels misaligned");
  if (distinct_labels(train.labels) < 2)
    throw InsufficientDataError(std::string(what) + ": training data holds a single class");
  if (!train.features.all_finite()) throw NonFiniteError(std::string(what) + ": non-finite features");
  for (int y : train.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= train.num_classes)
      throw Error(std::string(what) + ": label " + std::to_string(y) + " outside 0.." +
                  std::to_string(train.num_classes - 1));
}

// Numerically stable in-place softmax; returns log of the normalizer.
double softmax(std::span<double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return mx + std::log(sum);
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Tracks the stopping rule.
class ConvergenceMonitor {
 public:
  explicit ConvergenceMonitor(const ProbeConfig& cfg) : cfg_(cfg) {}

  // Returns true when training should stop after this epoch.
  bool observe(double epoch_loss) {
    ++epochs_;
    last_ = epoch_loss;
    if (epoch_loss < best_ * (1.0 - cfg_.tol)) {
      stale_ = 0;
    } else {
      ++stale_;
    }
    best_ = std::min(best_, epoch_loss);
    if (stale_ >= cfg_.patience) {
      converged_ = true;
      return true;
    }
    return epochs_ >= cfg_.max_epochs;
  }

  TrainingMeta meta() const { return {epochs_, last_, converged_}; }

 private:
  const ProbeConfig& cfg_;
  double best_ = std::numeric_limits<double>::infinity();
  double last_ = 0.0;
  int epochs_ = 0;
  int stale_ = 0;
  bool converged_ = false;
};

template <typename Probe>
double score(const Probe& probe, const LabeledSet& test) {
  if (test.size() == 0) throw InsufficientDataError("evaluate_probe: empty test set");
  for (int y : test.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= probe.num_classes())
      throw Error("evaluate_probe: test label " + std::to_string(y) + " unseen by the probe");
  return macro_f1(test.labels, probe.predict(test.features));
}

}  // namespace

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  const std::size_t h = x.cols();
  s.mean.assign(h, 0.0);
  s.scale.assign(h, 1.0);
  if (x.rows() == 0) return s;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < h; ++c) s.mean[c] += x(r, c);
  for (double& m : s.mean) m /= static_cast<double>(x.rows());
  Vector var(h, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < h; ++c) {
      const double d = x(r, c) - s.mean[c];
      var[c] += d * d;
    }
  for (std::size_t c = 0; c < h; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(x.rows()));
    s.scale[c] = sd > 1e-12 * (1.0 + std::abs(s.mean[c])) ? 1.0 / sd : 1.0;
  }
  return s;
}

Vector Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) throw ShapeError("probe: feature width mismatch");
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) * scale[i];
  return out;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw ShapeError("probe: feature width mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) * scale[c];
  return out;
}

int LinearProbe::predict(std::span<const double> x) const {
  const Vector xs = standardizer.apply(x);
  Vector logits(bias);
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += dot(weights.row(c), xs);
  return static_cast<int>(argmax(logits));
}

std::vector<int> LinearProbe::predict(const Matrix& x) const {
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(x.row(r));
  return out;
}

int MlpProbe::predict(std::span<const double> x) const {
  const Vector xs = standardizer.apply(x);
  const std::size_t units = hidden_bias.size();
  Vector hidden(hidden_bias);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] == 0.0) continue;
    auto w = hidden_weights.row(i);
    for (std::size_t u = 0; u < units; ++u) hidden[u] += xs[i] * w[u];
  }
  Vector logits(output_bias);
  for (std::size_t u = 0; u < units; ++u) {
    const double a = std::max(0.0, hidden[u]);
    if (a == 0.0) continue;
    auto w = output_weights.row(u);
    for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += a * w[c];
  }
  return static_cast<int>(argmax(logits));
}

std::vector<int> MlpProbe::predict(const Matrix& x) const {
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(x.row(r));
  return out;
}

LinearProbe train_linear_probe(const LabeledSet& train, std::uint64_t seed, const ProbeConfig& cfg) {
  validate_training_set(train, "train_linear_probe");
  const std::size_t n = train.size();
  const std::size_t h = train.dim();
  const std::size_t k = train.num_classes;

  LinearProbe probe;
  probe.seed = seed;
  probe.standardizer = Standardizer::fit(train.features);
  probe.weights = Matrix(k, h);
  probe.bias.assign(k, 0.0);
  const Matrix x = probe.standardizer.apply(train.features);

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  ConvergenceMonitor monitor(cfg);
  Vector p(k);
  std::size_t t = 0;
  for (;;) {
    rng.shuffle(std::span(order));
    double loss = 0.0;
    for (std::size_t idx : order) {
      const double eta = cfg.linear_eta0 / (1.0 + cfg.linear_eta0 * cfg.l2 * static_cast<double>(t++));
      auto xr = x.row(idx);
      const auto y = static_cast<std::size_t>(train.labels[idx]);
      for (std::size_t c = 0; c < k; ++c) p[c] = probe.bias[c] + dot(probe.weights.row(c), xr);
      softmax(p);
      loss += -std::log(std::max(p[y], 1e-300));
      const double shrink = 1.0 - eta * cfg.l2;
      for (std::size_t c = 0; c < k; ++c) {
        const double g = p[c] - (c == y ? 1.0 : 0.0);
        auto w = probe.weights.row(c);
        for (std::size_t j = 0; j < h; ++j) w[j] = shrink * w[j] - eta * g * xr[j];
        probe.bias[c] -= eta * g;
      }
    }
    const double reg = 0.5 * cfg.l2 * std::pow(frobenius_norm(probe.weights), 2);
    if (monitor.observe(loss / static_cast<double>(n) + reg)) break;
  }
  probe.meta = monitor.meta();
  return probe;
}

MlpProbe train_mlp_probe(const LabeledSet& train, std::uint64_t seed, const ProbeConfig& cfg) {
  validate_training_set(train, "train_mlp_probe");
  const std::size_t n = train.size();
  const std::size_t h = train.dim();
  const std::size_t k = train.num_classes;
  const std::size_t units = cfg.hidden_units;
  const std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch_size, n));

  MlpProbe probe;
  probe.seed = seed;
  probe.standardizer = Standardizer::fit(train.features);
  const Matrix x = probe.standardizer.apply(train.features);

  Rng rng(seed);
  // Glorot-uniform initialization.
  const double b1 = std::sqrt(6.0 / static_cast<double>(h + units));
  const double b2 = std::sqrt(6.0 / static_cast<double>(units + k));
  probe.hidden_weights = Matrix(h, units);
  for (double& w : probe.hidden_weights.data()) w = rng.uniform(-b1, b1);
  probe.hidden_bias.resize(units);
  for (double& w : probe.hidden_bias) w = rng.uniform(-b1, b1);
  probe.output_weights = Matrix(units, k);
  for (double& w : probe.output_weights.data()) w = rng.uniform(-b2, b2);
  probe.output_bias.resize(k);
  for (double& w : probe.output_bias) w = rng.uniform(-b2, b2);

  Matrix v_hw(h, units), g_hw(h, units);
  Vector v_hb(units, 0.0), g_hb(units);
  Matrix v_ow(units, k), g_ow(units, k);
  Vector v_ob(k, 0.0), g_ob(k);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vector hidden(units), act(units), logits(k), d_hidden(units);
  ConvergenceMonitor monitor(cfg);
  for (;;) {
    rng.shuffle(std::span(order));
    double loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      std::fill(g_hw.data().begin(), g_hw.data().end(), 0.0);
      std::fill(g_hb.begin(), g_hb.end(), 0.0);
      std::fill(g_ow.data().begin(), g_ow.data().end(), 0.0);
      std::fill(g_ob.begin(), g_ob.end(), 0.0);

      for (std::size_t s = start; s < stop; ++s) {
        const std::size_t idx = order[s];
        auto xr = x.row(idx);
        const auto y = static_cast<std::size_t>(train.labels[idx]);
        std::copy(probe.hidden_bias.begin(), probe.hidden_bias.end(), hidden.begin());
        for (std::size_t i = 0; i < h; ++i) {
          if (xr[i] == 0.0) continue;
          auto w = probe.hidden_weights.row(i);
          for (std::size_t u = 0; u < units; ++u) hidden[u] += xr[i] * w[u];
        }
        for (std::size_t u = 0; u < units; ++u) act[u] = std::max(0.0, hidden[u]);
        std::copy(probe.output_bias.begin(), probe.output_bias.end(), logits.begin());
        for (std::size_t u = 0; u < units; ++u) {
          if (act[u] == 0.0) continue;
          auto w = probe.output_weights.row(u);
          for (std::size_t c = 0; c < k; ++c) logits[c] += act[u] * w[c];
        }
        softmax(logits);
        loss += -std::log(std::max(logits[y], 1e-300));

        logits[y] -= 1.0;  // dL/dlogits
        for (std::size_t c = 0; c < k; ++c) g_ob[c] += logits[c];
        for (std::size_t u = 0; u < units; ++u) {
          double back = 0.0;
          auto w = probe.output_weights.row(u);
          auto gw = g_ow.row(u);
          for (std::size_t c = 0; c < k; ++c) {
            gw[c] += act[u] * logits[c];
            back += w[c] * logits[c];
          }
          d_hidden[u] = hidden[u] > 0.0 ? back : 0.0;
          g_hb[u] += d_hidden[u];
        }
        for (std::size_t i = 0; i < h; ++i) {
          if (xr[i] == 0.0) continue;
          auto gw = g_hw.row(i);
          for (std::size_t u = 0; u < units; ++u) gw[u] += xr[i] * d_hidden[u];
        }
      }

      const double lr = cfg.mlp_learning_rate;
      const double mu = cfg.momentum;
      auto step = [&](std::span<double> param, std::span<double> vel, std::span<const double> grad, bool decay) {
        for (std::size_t i = 0; i < param.size(); ++i) {
          const double g = grad[i] * inv_b + (decay ? cfg.l2 * param[i] : 0.0);
          vel[i] = mu * vel[i] - lr * g;
          param[i] += vel[i];
        }
      };
      step(probe.hidden_weights.data(), v_hw.data(), g_hw.data(), true);
      step(probe.hidden_bias, v_hb, g_hb, false);
      step(probe.output_weights.data(), v_ow.data(), g_ow.data(), true);
      step(probe.output_bias, v_ob, g_ob, false);
    }
    const double reg = 0.5 * cfg.l2 *
                       (std::pow(frobenius_norm(probe.hidden_weights), 2) +
                        std::pow(frobenius_norm(probe.output_weights), 2));
    if (monitor.observe(loss / static_cast<double>(n) + reg)) break;
  }
  probe.meta = monitor.meta();
  return probe;
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("macro_f1: length mismatch");
  if (truth.empty()) throw InsufficientDataError("macro_f1: no samples");
  std::map<int, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) {
      ++counts[truth[i]][0];
    } else {
      ++counts[predicted[i]][1];
      ++counts[truth[i]][2];
    }
  }
  double sum = 0.0;
  for (const auto& [label, c] : counts) {
    const double denom = static_cast<double>(2 * c[0] + c[1] + c[2]);
    sum += denom > 0.0 ? 2.0 * static_cast<double>(c[0]) / denom : 0.0;
  }
  return sum / static_cast<double>(counts.size());
}

double evaluate_probe(const LinearProbe& probe, const LabeledSet& test) { return score(probe, test); }
double evaluate_probe(const MlpProbe& probe, const LabeledSet& test) { return score(probe, test); }

const char* to_string(ProbeKind kind) { return kind == ProbeKind::kLinear ? "linear" : "mlp"; }

nlohmann::json ProbeReport::to_json() const {
  return {{"kind", to_string(kind)},
          {"seeds", seeds},
          {"scores", scores},
          {"mean", mean},
          {"std", std},
          {"n_train", n_train},
          {"n_test", n_test},
          {"chance_level", chance_level},
          {"majority_baseline", majority_baseline}};
}

double majority_baseline_f1(const std::vector<int>& labels) {
  if (labels.empty()) throw InsufficientDataError("majority_baseline_f1: no labels");
  std::map<int, std::size_t> freq;
  for (int y : labels) ++freq[y];
  const auto majority =
      std::max_element(freq.begin(), freq.end(), [](const auto& a, const auto& b) { return a.second < b.second; })
          ->first;
  return macro_f1(labels, std::vector<int>(labels.size(), majority));
}

ProbeReport run_probe_suite(const LabeledSet& train, const LabeledSet& test, ProbeKind kind,
                            const ProbeConfig& cfg) {
  if (train.size() == 0) throw InsufficientDataError("run_probe_suite: empty training split");
  if (test.size() == 0) throw InsufficientDataError("run_probe_suite: empty test split");
  if (cfg.seeds.empty()) throw Error("run_probe_suite: no seeds configured");
  check_no_speaker_overlap(train, test);
  validate_training_set(train, "run_probe_suite");

  ProbeReport report;
  report.kind = kind;
  report.seeds = cfg.seeds;
  report.scores.assign(cfg.seeds.size(), 0.0);
  report.n_train = train.size();
  report.n_test = test.size();
  report.chance_level = 1.0 / static_cast<double>(distinct_labels(test.labels));
  report.majority_baseline = majority_baseline_f1(test.labels);

  std::vector<std::exception_ptr> errors(cfg.seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cfg.seeds.size()); ++i) {
    const auto s = static_cast<std::size_t>(i);
    try {
      report.scores[s] = kind == ProbeKind::kLinear ? evaluate_probe(train_linear_probe(train, cfg.seeds[s], cfg), test)
                                                    : evaluate_probe(train_mlp_probe(train, cfg.seeds[s], cfg), test);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  const double n = static_cast<double>(report.scores.size());
  report.mean = std::accumulate(report.scores.begin(), report.scores.end(), 0.0) / n;
  double var = 0.0;
  for (double s : report.scores) var += (s - report.mean) * (s - report.mean);
  report.std = std::sqrt(var / n);
  return report;
}

}  // namespace scrubkit
