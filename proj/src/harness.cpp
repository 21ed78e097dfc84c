#include "scrubkit/harness.hpp"

#include <fstream>

#include "scrubkit/errors.hpp"

namespace scrubkit {
namespace {

std::vector<std::string> state_labels(const LayerStack& stack) {
  std::vector<std::string> labels;
  for (std::size_t s = 0; s <= stack.num_layers(); ++s) labels.push_back(stack.state_label(s));
  return labels;
}

std::vector<std::string> position_labels() {
  std::vector<std::string> labels;
  for (std::size_t p = 0; p < kSnapshotCount; ++p) labels.push_back(std::to_string(p));
  return labels;
}

std::filesystem::path write_table(const std::filesystem::path& path, const ResultMatrix& m, const Matrix& values) {
  std::ofstream out(path, std::ios::trunc);
  out.precision(17);
  out << m.row_title;
  for (const auto& c : m.col_labels) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    out << m.row_labels[r];
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) out << ',' << values(r, c);
    out << '\n';
  }
  if (!out) throw FormatError(FormatErrorKind::kIo, "write failed on " + path.string());
  return path;
}

}  // namespace

ResultMatrix::ResultMatrix(std::string n, std::vector<std::string> rows, std::vector<std::string> cols)
    : name(std::move(n)),
      row_labels(std::move(rows)),
      col_labels(std::move(cols)),
      mean(row_labels.size(), col_labels.size()),
      std(row_labels.size(), col_labels.size()),
      scores(row_labels.size(), std::vector<std::vector<double>>(col_labels.size())) {}

void ResultMatrix::set(std::size_t r, std::size_t c, const ProbeReport& report) {
  mean(r, c) = report.mean;
  std(r, c) = report.std;
  scores.at(r).at(c) = report.scores;
  seeds = report.seeds;
}

nlohmann::json ResultMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t c = 0; c < col_labels.size(); ++c)
      cells.push_back({{"mean", mean(r, c)}, {"std", std(r, c)}, {"scores", scores[r][c]}});
    rows.push_back({{"label", row_labels[r]}, {"cells", cells}});
  }
  return {{"name", name}, {"row_title", row_title}, {"columns", col_labels}, {"seeds", seeds}, {"rows", rows}};
}

std::vector<std::filesystem::path> ResultMatrix::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  files.push_back(write_table(dir / (name + ".csv"), *this, mean));
  files.push_back(write_table(dir / (name + "_std.csv"), *this, std));
  const auto long_form = dir / (name + "_seeds.csv");
  std::ofstream out(long_form, std::ios::trunc);
  out.precision(17);
  out << row_title << ",column,seed,f1\n";
  for (std::size_t r = 0; r < row_labels.size(); ++r)
    for (std::size_t c = 0; c < col_labels.size(); ++c)
      for (std::size_t s = 0; s < scores[r][c].size(); ++s)
        out << row_labels[r] << ',' << col_labels[c] << ',' << (s < seeds.size() ? seeds[s] : s) << ','
            << scores[r][c][s] << '\n';
  files.push_back(long_form);
  const auto json_path = dir / (name + ".json");
  std::ofstream(json_path, std::ios::trunc) << to_json().dump(2) << '\n';
  files.push_back(json_path);
  return files;
}

EmbeddingSequence original_state(const LayerStack& stack, const EmbeddingSequence& input, std::size_t state) {
  if (state > stack.num_layers()) throw MissingDataError("hidden state " + std::to_string(state) + " does not exist");
  if (auto recorded = stack.recorded_state(input.utterance_id, state)) return std::move(*recorded);
  EmbeddingSequence seq = input;
  for (std::size_t j = 0; j < state; ++j) seq = stack.apply(j, seq);
  return seq;
}

ResultMatrix run_mean_probing(const LayerStack& stack, const Corpus& corpus, const ProbeConfig& cfg) {
  const auto pooled = pooled_states(stack, corpus);
  ResultMatrix m("mean_probe", state_labels(stack), {"f1"});
  for (std::size_t s = 0; s < pooled.size(); ++s) {
    const auto [train, test] = split_rows(pooled[s], corpus);
    m.set(s, 0, run_probe_suite(train, test, ProbeKind::kLinear, cfg));
  }
  return m;
}

ResultMatrix tracking_matrix(const ScrubRun& run, const LayerStack& stack) {
  std::vector<std::string> rows;
  for (const auto& t : run.tracking) rows.push_back(stack.state_label(t.layer));
  ResultMatrix m("tracking", rows, {"input_linear", "input_mlp", "output_linear", "baseline"});
  for (std::size_t r = 0; r < run.tracking.size(); ++r) {
    const auto& t = run.tracking[r];
    m.set(r, 0, t.input_linear);
    m.set(r, 1, t.input_mlp);
    m.set(r, 2, t.output_linear);
    m.set(r, 3, t.baseline);
  }
  return m;
}

ResultMatrix run_tracking(const LayerStack& stack, const Corpus& corpus, const ScrubConfig& cfg, ScrubRun* run_out) {
  ScrubConfig c = cfg;
  c.track = true;
  ScrubRun run = scrub(stack, corpus, c);
  ResultMatrix m = tracking_matrix(run, stack);
  if (run_out) *run_out = std::move(run);
  return m;
}

SnapshotCorpus snapshot_corpus(const LayerStack& stack, const Corpus& corpus, std::size_t state) {
  if (state > stack.num_layers()) throw MissingDataError("hidden state " + std::to_string(state) + " does not exist");
  SnapshotCorpus out;
  out.layer = state;
  out.num_classes = corpus.classes().size();
  out.utterances = corpus.utterances();
  out.snapshots.resize(corpus.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    try {
      out.snapshots[i] = extract_snapshots(original_state(stack, corpus.input(i), state));
    } catch (...) {
#pragma omp critical(scrubkit_snapshot_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

ResultMatrix run_snapshot_probing(const LayerStack& stack, const Corpus& corpus, const ProbeConfig& cfg,
                                  std::vector<std::size_t> states) {
  if (states.empty())
    for (std::size_t s = 0; s <= stack.num_layers(); ++s) states.push_back(s);
  std::vector<std::string> rows;
  for (auto s : states) rows.push_back(stack.state_label(s));
  ResultMatrix m("snapshot_probe", rows, position_labels());
  for (std::size_t r = 0; r < states.size(); ++r) {
    const SnapshotCorpus snaps = snapshot_corpus(stack, corpus, states[r]);
    for (std::size_t p = 0; p < kSnapshotCount; ++p) {
      const auto [train, test] = build_position_dataset(snaps, states[r], p, p);
      m.set(r, p, run_probe_suite(train, test, ProbeKind::kLinear, cfg));
    }
  }
  return m;
}

ResultMatrix cross_position_matrix(const SnapshotCorpus& snaps, const ProbeConfig& cfg) {
  ResultMatrix m("cross_position", position_labels(), position_labels());
  m.row_title = "train_position";
  for (std::size_t p = 0; p < kSnapshotCount; ++p)
    for (std::size_t q = 0; q < kSnapshotCount; ++q) {
      const auto [train, test] = build_position_dataset(snaps, snaps.layer, p, q);
      m.set(p, q, run_probe_suite(train, test, ProbeKind::kLinear, cfg));
    }
  return m;
}

ResultMatrix run_cross_position(const LayerStack& stack, const Corpus& corpus, std::size_t state,
                                const ProbeConfig& cfg) {
  ResultMatrix m = cross_position_matrix(snapshot_corpus(stack, corpus, state), cfg);
  m.name = "cross_position_" + stack.state_label(state);
  return m;
}

nlohmann::json wer_report(const WerComparison& cmp, const std::string& corpus_name) {
  // Display-only context: WER in percent before and after scrubbing as
  // published for full-size models.
  const nlohmann::json reference = {
      {{"corpus", "TIMIT"}, {"model", "wav2vec2-large-960h"}, {"original", 23.96}, {"scrubbed", 24.18}},
      {{"corpus", "LibriSpeech"}, {"model", "hubert-large-ls960-ft"}, {"original", 2.07}, {"scrubbed", 2.90}}};
  return {{"corpus", corpus_name},
          {"wer_original", cmp.wer_original},
          {"wer_scrubbed", cmp.wer_scrubbed},
          {"delta", cmp.wer_scrubbed - cmp.wer_original},
          {"utterances", cmp.utterances},
          {"reference_words", cmp.reference_words},
          {"published_reference", reference}};
}

}  // namespace scrubkit
