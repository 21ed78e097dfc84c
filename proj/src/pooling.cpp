#include "scrubkit/pooling.hpp"

#include "scrubkit/errors.hpp"
#include "scrubkit/kernels.hpp"

namespace scrubkit {

Vector mean_pool(const EmbeddingSequence& seq) {
  if (seq.length() == 0) throw InsufficientDataError("mean_pool: empty sequence '" + seq.utterance_id + "'");
  return kernels::column_means(seq.frames);
}

std::array<std::size_t, kSnapshotCount> snapshot_indices(std::size_t length) {
  if (length == 0) throw InsufficientDataError("snapshot_indices: T must be at least 1");
  constexpr std::size_t kDen = kSnapshotCount - 1;
  std::array<std::size_t, kSnapshotCount> idx{};
  for (std::size_t i = 0; i < kSnapshotCount; ++i) {
    const std::size_t num = i * (length - 1);
    std::size_t q = num / kDen;
    const std::size_t r = num % kDen;
    if (2 * r > kDen || (2 * r == kDen && q % 2 == 1)) ++q;
    idx[i] = q;
  }
  return idx;
}

SnapshotSet extract_snapshots(const EmbeddingSequence& seq) {
  SnapshotSet out;
  out.positions = snapshot_indices(seq.length());
  out.vectors = Matrix(kSnapshotCount, seq.width());
  for (std::size_t i = 0; i < kSnapshotCount; ++i) {
    auto src = seq.frames.row(out.positions[i]);
    auto dst = out.vectors.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

std::pair<LabeledSet, LabeledSet> build_position_dataset(const SnapshotCorpus& corpus, std::size_t layer,
                                                         std::size_t train_pos, std::size_t test_pos) {
  if (train_pos >= kSnapshotCount || test_pos >= kSnapshotCount)
    throw Error("build_position_dataset: positions must be in 0..9");
  if (corpus.layer != layer)
    throw MissingDataError("build_position_dataset: corpus holds layer " + std::to_string(corpus.layer) +
                           ", requested " + std::to_string(layer));
  if (corpus.snapshots.size() != corpus.utterances.size())
    throw ShapeError("build_position_dataset: snapshot and utterance counts differ");
  if (corpus.utterances.size() < 2)
    throw InsufficientDataError("build_position_dataset: need at least two utterances");

  LabeledSet train, test;
  train.num_classes = test.num_classes = corpus.num_classes;
  for (std::size_t u = 0; u < corpus.utterances.size(); ++u) {
    const Utterance& utt = corpus.utterances[u];
    const bool is_train = utt.split == Split::kTrain;
    const std::size_t pos = is_train ? train_pos : test_pos;
    (is_train ? train : test).append(corpus.snapshots[u].vectors.row(pos), utt.label, utt.speaker);
  }
  if (train.size() == 0 || test.size() == 0)
    throw InsufficientDataError("build_position_dataset: both splits need at least one utterance");
  check_no_speaker_overlap(train, test);
  return {std::move(train), std::move(test)};
}

}  // namespace scrubkit
