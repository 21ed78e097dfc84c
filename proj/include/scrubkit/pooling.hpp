#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "scrubkit/dataset.hpp"
#include "scrubkit/matrix.hpp"

namespace scrubkit {

/// Hidden states of one utterance at one layer: T frames × H dims.
/// Frames are stored as doubles in memory; the on-disk container keeps f32.
struct EmbeddingSequence {
  std::string utterance_id;
  std::size_t layer = 0;
  Matrix frames;

  std::size_t length() const noexcept { return frames.rows(); }
  std::size_t width() const noexcept { return frames.cols(); }
};

inline constexpr std::size_t kSnapshotCount = 10;

/// Ten rows gathered from a sequence, first and last frame included.
struct SnapshotSet {
  std::array<std::size_t, kSnapshotCount> positions{};
  Matrix vectors;  // 10 × H
};

/// Arithmetic mean over frames.
Vector mean_pool(const EmbeddingSequence& seq);

/// index_i = round(i·(T−1)/9), i = 0..9. Halves round to even, although
/// with denominator 9 a tie never occurs. T < 10 yields repeated indices.
std::array<std::size_t, kSnapshotCount> snapshot_indices(std::size_t length);

/// Exact row copies at snapshot_indices(T).
SnapshotSet extract_snapshots(const EmbeddingSequence& seq);

/// Snapshots of every utterance at one layer, aligned with utterance metadata.
struct SnapshotCorpus {
  std::size_t layer = 0;
  std::vector<Utterance> utterances;
  std::vector<SnapshotSet> snapshots;
  std::size_t num_classes = 2;
};

/// Training rows are the snapshot at train_pos of each train utterance,
/// test rows the snapshot at test_pos of each test utterance; every row
/// carries its utterance's label.
std::pair<LabeledSet, LabeledSet> build_position_dataset(const SnapshotCorpus& corpus, std::size_t layer,
                                                         std::size_t train_pos, std::size_t test_pos);

}  // namespace scrubkit
