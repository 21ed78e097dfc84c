#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "scrubkit/container.hpp"
#include "scrubkit/dataset.hpp"
#include "scrubkit/manifest.hpp"
#include "scrubkit/pooling.hpp"

namespace scrubkit {

/// A frozen network seen as n_layers frame-sequence transforms. Transform j
/// maps hidden state j to hidden state j+1; state 0 is the input to the
/// first transform. Implementations must be deterministic and safe to call
/// concurrently.
class LayerStack {
 public:
  virtual ~LayerStack() = default;

  virtual std::string name() const = 0;
  virtual std::size_t num_layers() const = 0;
  virtual std::size_t width() const = 0;
  virtual EmbeddingSequence apply(std::size_t layer, const EmbeddingSequence& input) const = 0;

  /// The unmodified hidden state `state` of an utterance when the stack can
  /// look it up directly (dumps); nullopt means "replay from the input".
  virtual std::optional<EmbeddingSequence> recorded_state(const std::string& utterance_id, std::size_t state) const;

  /// Display label of hidden state `state` (e.g. the model's layer number).
  virtual std::string state_label(std::size_t state) const { return std::to_string(state); }
};

/// Utterances with labels plus their layer-0 hidden states.
class Corpus {
 public:
  virtual ~Corpus() = default;

  virtual std::size_t size() const = 0;
  virtual const Utterance& utterance(std::size_t i) const = 0;
  virtual const std::vector<std::string>& classes() const = 0;
  virtual std::size_t width() const = 0;
  /// Layer-0 states of utterance i. Safe to call concurrently.
  virtual EmbeddingSequence input(std::size_t i) const = 0;

  std::vector<Utterance> utterances() const;
};

class InMemoryCorpus final : public Corpus {
 public:
  InMemoryCorpus(std::vector<std::string> classes, std::vector<Utterance> utterances,
                 std::vector<EmbeddingSequence> inputs);

  std::size_t size() const override { return utterances_.size(); }
  const Utterance& utterance(std::size_t i) const override { return utterances_.at(i); }
  const std::vector<std::string>& classes() const override { return classes_; }
  std::size_t width() const override { return width_; }
  EmbeddingSequence input(std::size_t i) const override { return inputs_.at(i); }

 private:
  std::vector<std::string> classes_;
  std::vector<Utterance> utterances_;
  std::vector<EmbeddingSequence> inputs_;
  std::size_t width_ = 0;
};

/// Random access to the records of one container through its offset index.
/// Reads are serialized by a mutex.
class DumpStore {
 public:
  explicit DumpStore(const std::filesystem::path& container);

  const ContainerHeader& header() const noexcept { return header_; }
  /// Dumped layer numbers, ascending.
  const std::vector<std::uint32_t>& layers() const noexcept { return layers_; }
  bool contains(const std::string& utterance_id, std::uint32_t layer) const;
  EmbeddingSequence load(const std::string& utterance_id, std::uint32_t layer) const;

 private:
  mutable std::mutex mutex_;
  mutable ContainerReader reader_;
  ContainerHeader header_;
  std::map<std::pair<std::string, std::uint32_t>, RecordLocation> index_;
  std::vector<std::uint32_t> layers_;
};

/// Replays a dumped model: transform j adds the recorded residual between
/// dumped layers l_j and l_{j+1}, out = in + (dump[l_{j+1}] − dump[l_j]).
/// On unmodified inputs this reproduces the dump; on erased inputs it passes
/// the intervention forward the way a residual stream would.
class ReplayStack final : public LayerStack {
 public:
  explicit ReplayStack(std::shared_ptr<const DumpStore> store);

  std::string name() const override { return "replay"; }
  std::size_t num_layers() const override;
  std::size_t width() const override;
  EmbeddingSequence apply(std::size_t layer, const EmbeddingSequence& input) const override;
  std::optional<EmbeddingSequence> recorded_state(const std::string& utterance_id, std::size_t state) const override;
  std::string state_label(std::size_t state) const override;

 private:
  std::shared_ptr<const DumpStore> store_;
};

/// Layer-0 states from a dump, metadata from a manifest. Only utterances
/// present in both are kept; order follows the manifest.
class ContainerCorpus final : public Corpus {
 public:
  ContainerCorpus(std::shared_ptr<const DumpStore> store, const LabelManifest& manifest);

  std::size_t size() const override { return utterances_.size(); }
  const Utterance& utterance(std::size_t i) const override { return utterances_.at(i); }
  const std::vector<std::string>& classes() const override { return classes_; }
  std::size_t width() const override;
  EmbeddingSequence input(std::size_t i) const override;

 private:
  std::shared_ptr<const DumpStore> store_;
  std::vector<std::string> classes_;
  std::vector<Utterance> utterances_;
};

/// All n_layers+1 unmodified hidden states of one utterance.
std::vector<EmbeddingSequence> forward_all(const LayerStack& stack, const EmbeddingSequence& input);

/// Mean-pooled unmodified states: result[s] is an n×H matrix of state s,
/// rows in corpus order. Utterances are processed in parallel.
std::vector<Matrix> pooled_states(const LayerStack& stack, const Corpus& corpus);

/// Rows of `features` (corpus order) split into train/test LabeledSets.
std::pair<LabeledSet, LabeledSet> split_rows(const Matrix& features, const Corpus& corpus);

}  // namespace scrubkit
