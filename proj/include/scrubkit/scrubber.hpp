#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scrubkit/eraser.hpp"
#include "scrubkit/probes.hpp"
#include "scrubkit/stack.hpp"

namespace scrubkit {

struct ScrubConfig {
  EraserOptions eraser;
  ProbeConfig probe;
  /// Train the four tracking probes at every layer.
  bool track = true;
  /// Apply each transform twice to one utterance per layer and compare.
  bool check_determinism = true;
  /// When set, erased outputs of layer j are cached here (f64) so layer j+1
  /// reads them instead of replaying layers 0..j. Empty: replay.
  std::filesystem::path cache_dir;
  /// Utterances whose sequences are held in memory at once.
  std::size_t chunk_size = 64;

  nlohmann::json to_json() const;
};

/// Probe scores around one transform. Inputs are the erased inputs of the
/// cascade, outputs the transform applied to them, baseline the output of
/// the same transform in the unmodified model.
struct LayerTracking {
  std::size_t layer = 0;
  ProbeReport input_linear;
  ProbeReport input_mlp;
  ProbeReport output_linear;
  ProbeReport baseline;
};

struct ScrubRun {
  std::vector<Eraser> erasers;          // one per transform, fit on its input
  std::vector<LayerTracking> tracking;  // empty when tracking is off
  nlohmann::json config;
};

/// Fits erasers in cascade. For transform j the moments of hidden state j
/// are accumulated frame by frame over train utterances, with erasers
/// E_0..E_{j−1} applied in front of their transforms; E_j is fit from them.
/// Every frame of an utterance carries the utterance's label. Probes use
/// mean-pooled features: trained on the train split, scored on test.
ScrubRun scrub(const LayerStack& stack, const Corpus& corpus, const ScrubConfig& cfg = {});

/// Mean-pooled rows (corpus order) around one transform.
struct TrackingFeatures {
  Matrix erased_inputs;
  Matrix outputs;
  Matrix baseline;  // may be empty
};

/// Trains the tracking probes from pooled features. Rows must align with
/// `utterances`; the baseline report stays empty when no baseline is given.
LayerTracking track_layer(std::size_t layer, const TrackingFeatures& features, const std::vector<Utterance>& utterances,
                          std::size_t num_classes, const ProbeConfig& cfg = {});

/// State j of the cascade: transforms 0..j−1 each preceded by its eraser.
/// Only the first j erasers are used.
EmbeddingSequence cascade_state(const LayerStack& stack, const std::vector<Eraser>& erasers,
                                const EmbeddingSequence& input, std::size_t j);

/// Unmodified final state and final state of the scrubbed cascade.
EmbeddingSequence scrubbed_output(const LayerStack& stack, const std::vector<Eraser>& erasers,
                                  const EmbeddingSequence& input);

/// Run directory: layer_<j>.eraser, tracking.csv (layer, probe_kind, seed,
/// f1), config.json. Returns the files written.
std::vector<std::filesystem::path> write_scrub_run(const ScrubRun& run, const std::filesystem::path& dir);
/// Erasers back from a run directory, in layer order.
std::vector<Eraser> load_scrub_erasers(const std::filesystem::path& dir);

}  // namespace scrubkit
