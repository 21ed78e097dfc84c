#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scrubkit/asr.hpp"
#include "scrubkit/probes.hpp"
#include "scrubkit/scrubber.hpp"
#include "scrubkit/stack.hpp"

namespace scrubkit {

/// Rectangular table of mean macro-F1 with seed statistics.
struct ResultMatrix {
  std::string name;
  std::string row_title = "layer";
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Matrix mean;
  Matrix std;
  /// scores[r][c] holds the per-seed F1 values behind cell (r, c).
  std::vector<std::vector<std::vector<double>>> scores;
  std::vector<std::uint64_t> seeds;

  ResultMatrix() = default;
  ResultMatrix(std::string name, std::vector<std::string> rows, std::vector<std::string> cols);

  void set(std::size_t r, std::size_t c, const ProbeReport& report);
  double at(std::size_t r, std::size_t c) const { return mean(r, c); }

  nlohmann::json to_json() const;
  /// <name>.csv (means, matrix form), <name>_std.csv and <name>_seeds.csv
  /// (row, column, seed, f1). Returns the files written.
  std::vector<std::filesystem::path> write(const std::filesystem::path& dir) const;
};

/// Unmodified hidden state `state` (recorded when the stack has dumps).
EmbeddingSequence original_state(const LayerStack& stack, const EmbeddingSequence& input, std::size_t state);

/// Mean-pooled linear probe per hidden state 0..n_layers.
ResultMatrix run_mean_probing(const LayerStack& stack, const Corpus& corpus, const ProbeConfig& cfg = {});

/// Scrubs and tabulates the four tracked probes per transform.
ResultMatrix tracking_matrix(const ScrubRun& run, const LayerStack& stack);
ResultMatrix run_tracking(const LayerStack& stack, const Corpus& corpus, const ScrubConfig& cfg, ScrubRun* run_out = nullptr);

/// Snapshots of every utterance at one hidden state.
SnapshotCorpus snapshot_corpus(const LayerStack& stack, const Corpus& corpus, std::size_t state);

/// Linear probe trained and tested at the same snapshot position, for each
/// requested hidden state (all states when `states` is empty).
ResultMatrix run_snapshot_probing(const LayerStack& stack, const Corpus& corpus, const ProbeConfig& cfg = {},
                                  std::vector<std::size_t> states = {});

/// Cell (p, q): probe trained at position p, tested at position q.
ResultMatrix run_cross_position(const LayerStack& stack, const Corpus& corpus, std::size_t state,
                                const ProbeConfig& cfg = {});
ResultMatrix cross_position_matrix(const SnapshotCorpus& snapshots, const ProbeConfig& cfg = {});

/// WER before and after scrubbing, with published reference values kept for
/// display next to the measured ones.
nlohmann::json wer_report(const WerComparison& cmp, const std::string& corpus_name);

}  // namespace scrubkit
