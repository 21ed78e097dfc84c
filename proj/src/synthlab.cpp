#include "scrubkit/synthlab.hpp"

#include <cmath>

#include "scrubkit/errors.hpp"
#include "scrubkit/kernels.hpp"
#include "scrubkit/random.hpp"

namespace scrubkit {
namespace {

constexpr std::uint64_t kBasisStream = 0x5157'0000;
constexpr std::uint64_t kUtteranceStream = 0x7574'0000;

// Modified Gram–Schmidt on a Gaussian matrix; columns come out orthonormal.
Matrix random_orthogonal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix q(n, n);
  for (double& v : q.data()) v = rng.normal();
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double d = 0.0;
      for (std::size_t r = 0; r < n; ++r) d += q(r, c) * q(r, p);
      for (std::size_t r = 0; r < n; ++r) q(r, c) -= d * q(r, p);
    }
    double nrm = 0.0;
    for (std::size_t r = 0; r < n; ++r) nrm += q(r, c) * q(r, c);
    nrm = std::sqrt(nrm);
    for (std::size_t r = 0; r < n; ++r) q(r, c) /= nrm;
  }
  return q;
}

std::vector<Matrix> synth_bases(const SynthConfig& cfg) {
  std::vector<Matrix> bases;
  for (std::size_t s = 0; s <= cfg.n_layers; ++s)
    bases.push_back(cfg.rotate ? random_orthogonal(cfg.hidden, Rng::derive(cfg.seed, kBasisStream + s))
                               : Matrix::identity(cfg.hidden));
  return bases;
}

bool is_test_speaker(std::size_t speaker, double test_fraction) {
  const auto cut = static_cast<std::size_t>(std::lround(test_fraction * 10.0));
  return (speaker / 2) % 10 < cut;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_utterances < 4) throw Error("synth: need at least 4 utterances");
  if (t_min < 1 || t_max < t_min) throw Error("synth: need 1 ≤ t_min ≤ t_max");
  if (n_layers < 1) throw Error("synth: need at least one layer");
  if (vocab_size < 1 || linguistic_dim < vocab_size + 1)
    throw Error("synth: linguistic_dim must hold the blank and every word symbol");
  if (linguistic_dim + 4 > hidden) throw Error("synth: linguistic_dim + 4 concept dims exceed H");
  if (n_speakers < 2 || n_speakers % 2 != 0) throw Error("synth: n_speakers must be even and ≥ 2");
  if (test_fraction <= 0.0 || test_fraction >= 1.0) throw Error("synth: test_fraction must be in (0, 1)");
  if (n_speakers < 20 && std::lround(test_fraction * 10.0) == 0) throw Error("synth: no test speakers");
  for (auto r : recovery_layers)
    if (r >= n_layers) throw Error("synth: recovery layer " + std::to_string(r) + " out of range");
  if (localization_layer >= 0) {
    if (static_cast<std::size_t>(localization_layer) >= n_layers) throw Error("synth: localization layer out of range");
    if (!recovery_layers.empty() && static_cast<std::size_t>(localization_layer) <= *recovery_layers.rbegin())
      throw Error("synth: localization layer must come after every recovery layer");
  }
  if (concept_in_content != 0.0 && vocab_size < 1) throw Error("synth: concept_in_content needs a word symbol");
}

nlohmann::json SynthConfig::to_json() const {
  return {{"n_utterances", n_utterances},
          {"t_min", t_min},
          {"t_max", t_max},
          {"hidden", hidden},
          {"n_layers", n_layers},
          {"concept_strength", concept_strength},
          {"recovery_layers", recovery_layers},
          {"localization_layer", localization_layer},
          {"linguistic_dim", linguistic_dim},
          {"vocab_size", vocab_size},
          {"n_speakers", n_speakers},
          {"test_fraction", test_fraction},
          {"content_scale", content_scale},
          {"content_noise", content_noise},
          {"recovery_gain", recovery_gain},
          {"recovery_sharpness", recovery_sharpness},
          {"localization_gain", localization_gain},
          {"concept_in_content", concept_in_content},
          {"rotate", rotate},
          {"seed", seed}};
}

const std::vector<std::string>& synth_classes() {
  static const std::vector<std::string> classes = {"female", "male"};
  return classes;
}

std::vector<std::string> synth_vocabulary(const SynthConfig& cfg) {
  std::vector<std::string> v = {"<blank>"};
  for (std::size_t i = 1; i <= cfg.vocab_size; ++i) v.push_back("w" + std::to_string(i));
  return v;
}

SynthCorpus generate_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t h = cfg.hidden, c_dim = cfg.linguistic_dim;
  const Matrix q0 = synth_bases(cfg).front();
  const auto vocab = synth_vocabulary(cfg);

  std::vector<Utterance> utts(cfg.n_utterances);
  std::vector<EmbeddingSequence> inputs(cfg.n_utterances);
  std::vector<std::vector<std::size_t>> symbols(cfg.n_utterances);

#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t u = 0; u < cfg.n_utterances; ++u) {
    Rng rng(Rng::derive(cfg.seed, kUtteranceStream + u));
    const std::size_t speaker = u % cfg.n_speakers;
    const int label = static_cast<int>(speaker % 2);
    char id[32], spk[32];
    std::snprintf(id, sizeof id, "utt%05zu", u);
    std::snprintf(spk, sizeof spk, "spk%03zu", speaker);
    Utterance& utt = utts[u];
    utt.id = id;
    utt.speaker = spk;
    utt.label = label;
    utt.split = is_test_speaker(speaker, cfg.test_fraction) ? Split::kTest : Split::kTrain;

    // symbol track: blanks, then words of 2–4 frames separated by 1–2 blanks
    const std::size_t t_len = cfg.t_min + rng.below(cfg.t_max - cfg.t_min + 1);
    std::vector<std::size_t>& track = symbols[u];
    track.assign(1 + rng.below(2), 0);
    while (track.size() < t_len) {
      const std::size_t sym = 1 + rng.below(cfg.vocab_size);
      const std::size_t len = 2 + rng.below(3);
      utt.transcript.push_back(vocab[sym]);
      for (std::size_t i = 0; i < len && track.size() < t_len; ++i) track.push_back(sym);
      const std::size_t gap = 1 + rng.below(2);
      for (std::size_t i = 0; i < gap && track.size() < t_len; ++i) track.push_back(0);
    }
    track.resize(t_len);

    const double z = label - 0.5;
    double a = 1.0 + 0.5 * std::abs(rng.normal());
    double b = 1.0 + 0.5 * std::abs(rng.normal());
    if (rng.uniform() < 0.5) a = -a;
    if ((a > 0) != (label == 1)) b = -b;  // sign(a·b) = +1 for label 1

    Matrix canon(t_len, h);
    for (std::size_t t = 0; t < t_len; ++t) {
      auto row = canon.row(t);
      for (std::size_t d = 0; d < c_dim; ++d) row[d] = rng.normal(0.0, cfg.content_noise);
      row[track[t]] += cfg.content_scale;
      row[cfg.g_index()] = rng.normal();
      if (cfg.concept_in_content != 0.0) {
        // moved between blank and w1 so that no content-free direction carries it
        row[1] += cfg.concept_in_content * z;
        row[0] -= cfg.concept_in_content * z;
      } else {
        row[cfg.g_index()] += cfg.concept_strength * z;
      }
      row[cfg.a_index()] = a + rng.normal(0.0, 0.1);
      row[cfg.b_index()] = b + rng.normal(0.0, 0.1);
      row[cfg.s_index()] = rng.normal(0.0, 0.1);
      for (std::size_t d = cfg.s_index() + 1; d < h; ++d) row[d] = rng.normal();
    }
    inputs[u] = EmbeddingSequence{utt.id, 0, kernels::matmul(canon, q0.transpose())};
  }

  SynthCorpus out;
  out.corpus = std::make_shared<InMemoryCorpus>(synth_classes(), std::move(utts), std::move(inputs));
  out.frame_symbols = std::move(symbols);
  return out;
}

SynthStack::SynthStack(SynthConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  bases_ = synth_bases(cfg_);
}

EmbeddingSequence SynthStack::apply(std::size_t layer, const EmbeddingSequence& input) const {
  if (layer >= cfg_.n_layers) throw Error("synth: transform index out of range");
  if (input.width() != cfg_.hidden) throw ShapeError("synth: input width differs from H");
  Matrix c = kernels::matmul(input.frames, bases_[layer]);
  const std::size_t t_len = c.rows();
  const std::size_t g = cfg_.g_index(), a = cfg_.a_index(), b = cfg_.b_index(), s = cfg_.s_index();

  if (cfg_.recovery_layers.count(layer)) {
    for (std::size_t t = 0; t < t_len; ++t)
      c(t, g) += cfg_.recovery_gain * std::tanh(cfg_.recovery_sharpness * c(t, a) * c(t, b));
  } else if (cfg_.localization_layer >= 0 && layer == static_cast<std::size_t>(cfg_.localization_layer)) {
    double mean_g = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) mean_g += c(t, g);
    mean_g /= static_cast<double>(t_len);
    const double v = cfg_.localization_gain * std::tanh(mean_g / 4.0);
    c(0, s) += v;
    if (t_len > 1) c(t_len - 1, s) += v;
    for (std::size_t t = 0; t < t_len; ++t) {
      c(t, g) = c(t, 0);
      c(t, a) = 0.0;
      c(t, b) = 0.0;
    }
  }
  return EmbeddingSequence{input.utterance_id, layer + 1, kernels::matmul(c, bases_[layer + 1].transpose())};
}

std::shared_ptr<const SynthStack> build_synth_stack(const SynthConfig& cfg) {
  return std::make_shared<const SynthStack>(cfg);
}

LinearHead fit_synth_head(const SynthStack& stack, const SynthCorpus& synth) {
  std::vector<EmbeddingSequence> finals;
  std::vector<std::vector<std::size_t>> targets;
  const Corpus& corpus = *synth.corpus;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.utterance(i).split != Split::kTrain) continue;
    finals.push_back(forward_all(stack, corpus.input(i)).back());
    targets.push_back(synth.frame_symbols[i]);
  }
  return fit_ridge_head(finals, targets, synth_vocabulary(stack.config()), 0);
}

void write_synth_dump(const SynthStack& stack, const SynthCorpus& synth, const std::filesystem::path& container,
                      const std::filesystem::path& manifest_path) {
  const Corpus& corpus = *synth.corpus;
  ContainerHeader header;
  header.hidden = static_cast<std::uint32_t>(stack.width());
  header.n_layers = static_cast<std::uint32_t>(stack.num_layers() + 1);
  header.n_utterances = static_cast<std::uint32_t>(corpus.size());
  std::vector<std::uint32_t> layers(stack.num_layers() + 1);
  for (std::size_t s = 0; s < layers.size(); ++s) layers[s] = static_cast<std::uint32_t>(s);
  header.metadata = {{"source", "synth"}, {"classes", corpus.classes()}, {"layers", layers},
                     {"synth", stack.config().to_json()}};
  ContainerWriter writer(container, header);
  LabelManifest manifest;
  manifest.classes = corpus.classes();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& state : forward_all(stack, corpus.input(i))) writer.write(state);
    const Utterance& u = corpus.utterance(i);
    std::string transcript;
    for (const auto& w : u.transcript) transcript += (transcript.empty() ? "" : " ") + w;
    manifest.rows.push_back(ManifestRow{u.id, u.speaker, corpus.classes()[static_cast<std::size_t>(u.label)],
                                        u.split, transcript});
  }
  writer.close();
  write_manifest(manifest_path, manifest);
}

}  // namespace scrubkit
