#include "scrubkit/stack.hpp"

#include <algorithm>
#include <set>

#include "scrubkit/errors.hpp"

namespace scrubkit {

std::optional<EmbeddingSequence> LayerStack::recorded_state(const std::string&, std::size_t) const {
  return std::nullopt;
}

std::vector<Utterance> Corpus::utterances() const {
  std::vector<Utterance> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(utterance(i));
  return out;
}

InMemoryCorpus::InMemoryCorpus(std::vector<std::string> classes, std::vector<Utterance> utterances,
                               std::vector<EmbeddingSequence> inputs)
    : classes_(std::move(classes)), utterances_(std::move(utterances)), inputs_(std::move(inputs)) {
  if (utterances_.size() != inputs_.size()) throw ShapeError("InMemoryCorpus: one input per utterance required");
  if (inputs_.empty()) throw InsufficientDataError("InMemoryCorpus: no utterances");
  width_ = inputs_.front().width();
  for (const auto& seq : inputs_)
    if (seq.width() != width_ || seq.length() == 0) throw ShapeError("InMemoryCorpus: inconsistent input shapes");
}

// ---------------------------------------------------------------- dumps

DumpStore::DumpStore(const std::filesystem::path& container) : reader_(container) {
  header_ = reader_.header();
  index_ = reader_.build_index();
  std::set<std::uint32_t> layers;
  for (const auto& [key, loc] : index_) layers.insert(key.second);
  layers_.assign(layers.begin(), layers.end());
}

bool DumpStore::contains(const std::string& utterance_id, std::uint32_t layer) const {
  return index_.count({utterance_id, layer}) > 0;
}

EmbeddingSequence DumpStore::load(const std::string& utterance_id, std::uint32_t layer) const {
  auto it = index_.find({utterance_id, layer});
  if (it == index_.end())
    throw MissingDataError("no dump for utterance " + utterance_id + " at layer " + std::to_string(layer));
  ContainerRecord r;
  {
    std::lock_guard lock(mutex_);
    r = reader_.read_at(it->second.offset);
  }
  return r.to_sequence(header_.hidden);
}

ReplayStack::ReplayStack(std::shared_ptr<const DumpStore> store) : store_(std::move(store)) {
  if (store_->layers().size() < 2) throw MissingDataError("replay needs at least two dumped layers");
}

std::size_t ReplayStack::num_layers() const { return store_->layers().size() - 1; }
std::size_t ReplayStack::width() const { return store_->header().hidden; }

EmbeddingSequence ReplayStack::apply(std::size_t layer, const EmbeddingSequence& input) const {
  if (layer >= num_layers()) throw Error("replay: transform index out of range");
  const auto& ls = store_->layers();
  const EmbeddingSequence from = store_->load(input.utterance_id, ls[layer]);
  const EmbeddingSequence to = store_->load(input.utterance_id, ls[layer + 1]);
  if (from.length() != input.length() || to.length() != input.length() || input.width() != width())
    throw ShapeError("replay: " + input.utterance_id + " has T=" + std::to_string(input.length()) +
                     " but the dump has T=" + std::to_string(from.length()));
  EmbeddingSequence out{input.utterance_id, layer + 1, input.frames};
  for (std::size_t i = 0; i < out.frames.size(); ++i)
    out.frames.data()[i] += to.frames.data()[i] - from.frames.data()[i];
  return out;
}

std::optional<EmbeddingSequence> ReplayStack::recorded_state(const std::string& utterance_id,
                                                             std::size_t state) const {
  if (state > num_layers()) throw Error("replay: state index out of range");
  EmbeddingSequence seq = store_->load(utterance_id, store_->layers()[state]);
  seq.layer = state;
  return seq;
}

std::string ReplayStack::state_label(std::size_t state) const {
  return std::to_string(store_->layers().at(state));
}

ContainerCorpus::ContainerCorpus(std::shared_ptr<const DumpStore> store, const LabelManifest& manifest)
    : store_(std::move(store)), classes_(manifest.classes) {
  if (store_->layers().empty()) throw MissingDataError("container holds no records");
  const std::uint32_t first = store_->layers().front();
  for (const Utterance& u : manifest.utterances())
    if (store_->contains(u.id, first)) utterances_.push_back(u);
  if (utterances_.empty()) throw MissingDataError("no manifest utterance is present in the container");
}

std::size_t ContainerCorpus::width() const { return store_->header().hidden; }

EmbeddingSequence ContainerCorpus::input(std::size_t i) const {
  EmbeddingSequence seq = store_->load(utterances_.at(i).id, store_->layers().front());
  seq.layer = 0;
  return seq;
}

// ---------------------------------------------------------------- helpers

std::vector<EmbeddingSequence> forward_all(const LayerStack& stack, const EmbeddingSequence& input) {
  std::vector<EmbeddingSequence> states;
  states.reserve(stack.num_layers() + 1);
  if (auto first = stack.recorded_state(input.utterance_id, 0)) {
    states.push_back(std::move(*first));
    for (std::size_t s = 1; s <= stack.num_layers(); ++s)
      states.push_back(std::move(*stack.recorded_state(input.utterance_id, s)));
    return states;
  }
  states.push_back(input);
  for (std::size_t j = 0; j < stack.num_layers(); ++j) states.push_back(stack.apply(j, states.back()));
  return states;
}

std::vector<Matrix> pooled_states(const LayerStack& stack, const Corpus& corpus) {
  const std::size_t n = corpus.size(), h = corpus.width(), states = stack.num_layers() + 1;
  std::vector<Matrix> pooled(states, Matrix(n, h));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto all = forward_all(stack, corpus.input(i));
      for (std::size_t s = 0; s < states; ++s) {
        const Vector m = mean_pool(all[s]);
        std::copy(m.begin(), m.end(), pooled[s].row(i).begin());
      }
    } catch (...) {
#pragma omp critical(scrubkit_pooled_states)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return pooled;
}

std::pair<LabeledSet, LabeledSet> split_rows(const Matrix& features, const Corpus& corpus) {
  if (features.rows() != corpus.size()) throw ShapeError("split_rows: one feature row per utterance required");
  LabeledSet train, test;
  train.num_classes = test.num_classes = corpus.classes().size();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Utterance& u = corpus.utterance(i);
    (u.split == Split::kTrain ? train : test).append(features.row(i), u.label, u.speaker);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace scrubkit
