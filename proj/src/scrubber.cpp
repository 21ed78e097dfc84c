#include "scrubkit/scrubber.hpp"

#include <algorithm>
#include <fstream>

#include "scrubkit/binary_io.hpp"
#include "scrubkit/errors.hpp"

namespace scrubkit {
namespace {

// Sequential f64 spill file for one hidden state of the cascade, records in
// corpus order: u64 T, then T·H doubles.
class StateCacheWriter {
 public:
  StateCacheWriter(const std::filesystem::path& path, std::size_t width) : path_(path), width_(width) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw FormatError(FormatErrorKind::kIo, "cannot create cache file " + path.string());
  }
  void write(const EmbeddingSequence& seq) {
    std::string buf;
    io::put_le<std::uint64_t>(buf, seq.length());
    for (double v : seq.frames.data()) io::put_le<double>(buf, v);
    out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out_) throw FormatError(FormatErrorKind::kIo, "write failed on " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::size_t width_;
  std::ofstream out_;
};

class StateCacheReader {
 public:
  StateCacheReader(const std::filesystem::path& path, std::size_t width) : path_(path), width_(width) {
    in_.open(path, std::ios::binary);
    if (!in_) throw FormatError(FormatErrorKind::kIo, "cannot open cache file " + path.string());
  }
  Matrix read() {
    char head[8];
    in_.read(head, 8);
    if (in_.gcount() != 8) throw FormatError(FormatErrorKind::kTruncated, path_.string() + ": cache ends early");
    const auto t = io::get_le<std::uint64_t>(head);
    std::vector<char> raw(t * width_ * sizeof(double));
    in_.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in_.gcount()) != raw.size())
      throw FormatError(FormatErrorKind::kTruncated, path_.string() + ": cache ends early");
    Matrix m(t, width_);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = io::get_le<double>(raw.data() + 8 * i);
    return m;
  }

 private:
  std::filesystem::path path_;
  std::size_t width_;
  std::ifstream in_;
};

std::pair<LabeledSet, LabeledSet> split_by_utterance(const Matrix& features, const std::vector<Utterance>& utts,
                                                     std::size_t num_classes) {
  if (features.rows() != utts.size())
    throw ShapeError("tracking: " + std::to_string(features.rows()) + " feature rows for " +
                     std::to_string(utts.size()) + " utterances");
  LabeledSet train, test;
  train.num_classes = test.num_classes = num_classes;
  for (std::size_t i = 0; i < utts.size(); ++i)
    (utts[i].split == Split::kTrain ? train : test).append(features.row(i), utts[i].label, utts[i].speaker);
  return {std::move(train), std::move(test)};
}

ProbeReport probe_rows(const Matrix& features, const std::vector<Utterance>& utts, std::size_t k, ProbeKind kind,
                       const ProbeConfig& cfg) {
  const auto [train, test] = split_by_utterance(features, utts, k);
  return run_probe_suite(train, test, kind, cfg);
}

void check_shape(const EmbeddingSequence& in, const EmbeddingSequence& out, std::size_t layer) {
  if (out.length() != in.length() || out.width() != in.width())
    throw ShapeError("transform " + std::to_string(layer) + " changed the shape of " + in.utterance_id + " from " +
                     std::to_string(in.length()) + "×" + std::to_string(in.width()) + " to " +
                     std::to_string(out.length()) + "×" + std::to_string(out.width()));
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(scrubkit_scrub_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

nlohmann::json ScrubConfig::to_json() const {
  return {{"rank_rtol", eraser.rank_rtol},
          {"null_tol", eraser.null_tol},
          {"probe",
           {{"tol", probe.tol},
            {"patience", probe.patience},
            {"max_epochs", probe.max_epochs},
            {"l2", probe.l2},
            {"linear_eta0", probe.linear_eta0},
            {"hidden_units", probe.hidden_units},
            {"mlp_learning_rate", probe.mlp_learning_rate},
            {"momentum", probe.momentum},
            {"batch_size", probe.batch_size},
            {"seeds", probe.seeds}}},
          {"track", track},
          {"check_determinism", check_determinism},
          {"cache_dir", cache_dir.string()},
          {"chunk_size", chunk_size}};
}

EmbeddingSequence cascade_state(const LayerStack& stack, const std::vector<Eraser>& erasers,
                                const EmbeddingSequence& input, std::size_t j) {
  if (j > erasers.size()) throw Error("cascade_state: need erasers for layers 0.." + std::to_string(j));
  EmbeddingSequence state = input;
  for (std::size_t l = 0; l < j; ++l) {
    EmbeddingSequence next = stack.apply(l, erase_sequence(erasers[l], state));
    check_shape(state, next, l);
    state = std::move(next);
  }
  return state;
}

EmbeddingSequence scrubbed_output(const LayerStack& stack, const std::vector<Eraser>& erasers,
                                  const EmbeddingSequence& input) {
  if (erasers.size() != stack.num_layers()) throw Error("scrubbed_output: one eraser per layer required");
  return cascade_state(stack, erasers, input, erasers.size());
}

LayerTracking track_layer(std::size_t layer, const TrackingFeatures& f, const std::vector<Utterance>& utts,
                          std::size_t k, const ProbeConfig& cfg) {
  LayerTracking t;
  t.layer = layer;
  t.input_linear = probe_rows(f.erased_inputs, utts, k, ProbeKind::kLinear, cfg);
  t.input_mlp = probe_rows(f.erased_inputs, utts, k, ProbeKind::kMlp, cfg);
  t.output_linear = probe_rows(f.outputs, utts, k, ProbeKind::kLinear, cfg);
  if (!f.baseline.empty()) t.baseline = probe_rows(f.baseline, utts, k, ProbeKind::kLinear, cfg);
  return t;
}

ScrubRun scrub(const LayerStack& stack, const Corpus& corpus, const ScrubConfig& cfg) {
  const std::size_t n = corpus.size(), h = corpus.width(), layers = stack.num_layers();
  const std::size_t k = corpus.classes().size();
  if (n == 0) throw InsufficientDataError("scrub: empty corpus");
  if (k < 2) throw InsufficientDataError("scrub: need at least two classes");
  if (stack.width() != h)
    throw ShapeError("scrub: stack width " + std::to_string(stack.width()) + " differs from corpus width " +
                     std::to_string(h));
  if (cfg.chunk_size == 0) throw Error("scrub: chunk_size must be positive");
  const std::vector<Utterance> utts = corpus.utterances();

  ScrubRun run;
  run.config = cfg.to_json();
  run.config["stack"] = stack.name();
  run.config["layers"] = layers;
  run.config["hidden"] = h;
  run.config["classes"] = corpus.classes();
  run.config["utterances"] = n;

  std::vector<Matrix> original;
  if (cfg.track) original = pooled_states(stack, corpus);

  const bool caching = !cfg.cache_dir.empty();
  if (caching) std::filesystem::create_directories(cfg.cache_dir);
  auto cache_path = [&](std::size_t state) { return cfg.cache_dir / ("state_" + std::to_string(state) + ".f64"); };

  for (std::size_t j = 0; j < layers; ++j) {
    // Streams hidden state j of the cascade chunk by chunk and hands each
    // chunk (first index, sequences) to `visit`.
    auto stream_state = [&](auto&& visit) {
      std::optional<StateCacheReader> cache;
      if (caching && j > 0) cache.emplace(cache_path(j), h);
      for (std::size_t start = 0; start < n; start += cfg.chunk_size) {
        const std::size_t m = std::min(cfg.chunk_size, n - start);
        std::vector<EmbeddingSequence> chunk(m);
        if (cache) {
          for (std::size_t i = 0; i < m; ++i)
            chunk[i] = EmbeddingSequence{utts[start + i].id, j, cache->read()};
        } else {
          parallel_for(m, [&](std::size_t i) {
            chunk[i] = cascade_state(stack, run.erasers, corpus.input(start + i), j);
            chunk[i].layer = j;
          });
        }
        visit(start, chunk);
      }
    };

    MomentAccumulator acc(h, k);
    stream_state([&](std::size_t start, const std::vector<EmbeddingSequence>& chunk) {
      std::size_t rows = 0;
      for (std::size_t i = 0; i < chunk.size(); ++i)
        if (utts[start + i].split == Split::kTrain) rows += chunk[i].length();
      if (rows == 0) return;
      Matrix x(rows, h), z(rows, k);
      std::size_t r = 0;
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        if (utts[start + i].split != Split::kTrain) continue;
        const auto& frames = chunk[i].frames;
        if (frames.cols() != h) throw ShapeError("scrub: " + chunk[i].utterance_id + " has the wrong width");
        std::copy(frames.data().begin(), frames.data().end(), x.row(r).begin());
        const auto label = static_cast<std::size_t>(utts[start + i].label);
        for (std::size_t t = 0; t < frames.rows(); ++t) z(r + t, label) = 1.0;
        r += frames.rows();
      }
      acc.update_rows(x, z);
    });
    if (acc.count() < 2) throw InsufficientDataError("scrub: fewer than two training frames at layer " + std::to_string(j));
    run.erasers.push_back(fit_eraser(acc, cfg.eraser, corpus.classes()));
    const Eraser& eraser = run.erasers.back();

    if (cfg.check_determinism) {
      const EmbeddingSequence erased = erase_sequence(eraser, cascade_state(stack, run.erasers, corpus.input(0), j));
      const EmbeddingSequence a = stack.apply(j, erased);
      const EmbeddingSequence b = stack.apply(j, erased);
      check_shape(erased, a, j);
      if (!(a.frames == b.frames))
        throw NondeterminismError("transform " + std::to_string(j) + " gave two different outputs for " +
                                  erased.utterance_id);
    }

    const bool last = j + 1 == layers;
    const bool spill = caching && !last;
    if (!cfg.track && !spill) continue;

    Matrix pooled_in(n, h), pooled_out(n, h);
    std::optional<StateCacheWriter> writer;
    if (spill) writer.emplace(cache_path(j + 1), h);
    stream_state([&](std::size_t start, const std::vector<EmbeddingSequence>& chunk) {
      std::vector<EmbeddingSequence> outs(chunk.size());
      parallel_for(chunk.size(), [&](std::size_t i) {
        const EmbeddingSequence erased = erase_sequence(eraser, chunk[i]);
        outs[i] = stack.apply(j, erased);
        check_shape(erased, outs[i], j);
        const Vector pin = mean_pool(erased), pout = mean_pool(outs[i]);
        std::copy(pin.begin(), pin.end(), pooled_in.row(start + i).begin());
        std::copy(pout.begin(), pout.end(), pooled_out.row(start + i).begin());
      });
      if (writer)
        for (const auto& o : outs) writer->write(o);
    });
    if (cfg.track)
      run.tracking.push_back(track_layer(j, TrackingFeatures{pooled_in, pooled_out, original[j + 1]}, utts, k, cfg.probe));
  }
  if (caching)
    for (std::size_t s = 1; s < layers; ++s) std::filesystem::remove(cache_path(s));
  return run;
}

std::vector<std::filesystem::path> write_scrub_run(const ScrubRun& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  for (std::size_t j = 0; j < run.erasers.size(); ++j) {
    const auto p = dir / ("layer_" + std::to_string(j) + ".eraser");
    save_eraser(run.erasers[j], p);
    files.push_back(p);
  }
  if (!run.tracking.empty()) {
    const auto p = dir / "tracking.csv";
    std::ofstream out(p, std::ios::trunc);
    out << "layer,probe_kind,seed,f1\n";
    out.precision(17);
    for (const auto& t : run.tracking) {
      const std::pair<const char*, const ProbeReport*> reports[] = {{"input_linear", &t.input_linear},
                                                                     {"input_mlp", &t.input_mlp},
                                                                     {"output_linear", &t.output_linear},
                                                                     {"baseline", &t.baseline}};
      for (const auto& [name, r] : reports)
        for (std::size_t s = 0; s < r->scores.size(); ++s)
          out << t.layer << ',' << name << ',' << r->seeds[s] << ',' << r->scores[s] << '\n';
    }
    if (!out) throw FormatError(FormatErrorKind::kIo, "write failed on " + p.string());
    files.push_back(p);
  }
  const auto cfg = dir / "config.json";
  std::ofstream(cfg, std::ios::trunc) << run.config.dump(2) << '\n';
  files.push_back(cfg);
  return files;
}

std::vector<Eraser> load_scrub_erasers(const std::filesystem::path& dir) {
  std::vector<Eraser> erasers;
  for (std::size_t j = 0;; ++j) {
    const auto p = dir / ("layer_" + std::to_string(j) + ".eraser");
    if (!std::filesystem::exists(p)) break;
    erasers.push_back(load_eraser(p));
  }
  if (erasers.empty()) throw MissingDataError("no eraser files in " + dir.string());
  return erasers;
}

}  // namespace scrubkit
