#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "scrubkit/asr.hpp"
#include "scrubkit/stack.hpp"

namespace scrubkit {

/// Synthetic corpus and layer stack with known ground truth.
///
/// Canonical coordinates of a frame (before the per-state rotation):
///   [0, C)  content: content_scale · one-hot(symbol) + noise, C = linguistic_dim
///   C       g, the linear concept: concept_strength · (z − ½) + N(0, 1)
///   C+1,C+2 a, b: per-utterance constants with sign(a·b) = ±1 by class
///   C+3     s, the localization slot
///   rest    N(0, 1) noise
/// Hidden state j is Q_j times the canonical vector, Q_j a fixed random
/// orthogonal matrix. Recovery transforms add recovery_gain ·
/// tanh(recovery_sharpness · a·b) to g, re-encoding the class linearly from
/// the XOR pair. The localization transform writes
/// localization_gain · tanh(mean_t g / 4) into s at frames 0 and T−1,
/// overwrites g with content and clears a, b. All other transforms only
/// rotate.
struct SynthConfig {
  std::size_t n_utterances = 1600;
  std::size_t t_min = 20;
  std::size_t t_max = 60;
  std::size_t hidden = 32;
  std::size_t n_layers = 8;
  double concept_strength = 5.0;
  std::set<std::size_t> recovery_layers = {1, 2, 3, 4};
  /// Negative: no localization transform.
  long localization_layer = 5;
  std::size_t linguistic_dim = 12;
  std::size_t vocab_size = 8;  // word symbols, blank excluded
  std::size_t n_speakers = 100;
  double test_fraction = 0.4;
  double content_scale = 6.0;
  double content_noise = 0.5;
  double recovery_gain = 3.0;
  double recovery_sharpness = 2.0;
  double localization_gain = 3.0;
  /// Put the concept on the content coordinate of symbol 1 instead of g, with
  /// this shift between classes; 0 disables.
  double concept_in_content = 0.0;
  bool rotate = true;
  std::uint64_t seed = 0;

  /// Throws on inconsistent settings.
  void validate() const;
  nlohmann::json to_json() const;

  std::size_t g_index() const noexcept { return linguistic_dim; }
  std::size_t a_index() const noexcept { return linguistic_dim + 1; }
  std::size_t b_index() const noexcept { return linguistic_dim + 2; }
  std::size_t s_index() const noexcept { return linguistic_dim + 3; }
};

/// Class names of synthetic corpora (index = label).
const std::vector<std::string>& synth_classes();
/// "<blank>" followed by one token per word symbol.
std::vector<std::string> synth_vocabulary(const SynthConfig& cfg);

struct SynthCorpus {
  std::shared_ptr<const InMemoryCorpus> corpus;
  /// Frame-level symbol ids (0 = blank) per utterance, for head fitting.
  std::vector<std::vector<std::size_t>> frame_symbols;
};

/// Deterministic per seed; utterances are generated independently from
/// streams derived from (seed, index). Speakers have a fixed class and
/// belong wholly to one split.
SynthCorpus generate_corpus(const SynthConfig& cfg);

class SynthStack final : public LayerStack {
 public:
  explicit SynthStack(SynthConfig cfg);

  std::string name() const override { return "synth"; }
  std::size_t num_layers() const override { return cfg_.n_layers; }
  std::size_t width() const override { return cfg_.hidden; }
  EmbeddingSequence apply(std::size_t layer, const EmbeddingSequence& input) const override;

  const SynthConfig& config() const noexcept { return cfg_; }
  /// Q_j (H×H, orthogonal).
  const Matrix& basis(std::size_t state) const { return bases_.at(state); }

 private:
  SynthConfig cfg_;
  std::vector<Matrix> bases_;  // n_layers + 1
};

std::shared_ptr<const SynthStack> build_synth_stack(const SynthConfig& cfg);

/// Ridge head fit on the unmodified final states of the train split.
LinearHead fit_synth_head(const SynthStack& stack, const SynthCorpus& synth);

/// Writes every hidden state 0..n_layers of the unmodified stack into a
/// container (records grouped by utterance) and the matching manifest.
void write_synth_dump(const SynthStack& stack, const SynthCorpus& synth, const std::filesystem::path& container,
                      const std::filesystem::path& manifest);

}  // namespace scrubkit
