// scrubkit command-line driver.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "scrubkit/asr.hpp"
#include "scrubkit/errors.hpp"
#include "scrubkit/harness.hpp"
#include "scrubkit/manifest.hpp"
#include "scrubkit/scrubber.hpp"
#include "scrubkit/stack.hpp"
#include "scrubkit/synthlab.hpp"

namespace fs = std::filesystem;
using namespace scrubkit;

namespace {

struct Options {
  std::string container;
  std::string manifest;
  std::string head;

  SynthConfig synth;
  std::vector<std::size_t> recovery_layers = {1, 2, 3, 4};

  ProbeConfig probe;
  EraserOptions eraser;

  std::string out = "scrubkit_out";
  int threads = 0;

  std::string cache_dir;
  std::size_t chunk_size = 64;
  bool skip_determinism_check = false;
  bool scrub_track = false;

  std::vector<std::size_t> layers;
  long cross_layer = -1;
  std::string run_dir;
  bool no_scrub = false;
};

struct Source {
  std::shared_ptr<const LayerStack> stack;
  std::shared_ptr<const Corpus> corpus;
  std::optional<SynthCorpus> synth;
  std::shared_ptr<const SynthStack> synth_stack;
  nlohmann::json description;
};

void log(const std::string& msg) { std::cerr << "[scrubkit] " << msg << std::endl; }

SynthConfig synth_config(const Options& o) {
  SynthConfig cfg = o.synth;
  cfg.recovery_layers = {o.recovery_layers.begin(), o.recovery_layers.end()};
  return cfg;
}

Source open_source(const Options& o) {
  Source src;
  if (!o.container.empty()) {
    if (o.manifest.empty()) throw Error("--container needs --manifest");
    const LabelManifest manifest = read_manifest(o.manifest);
    const ManifestReport report = validate_manifest(manifest, fs::path(o.container));
    if (!report.ok()) throw Error("manifest check failed: " + report.summary());
    auto store = std::make_shared<const DumpStore>(o.container);
    src.stack = std::make_shared<const ReplayStack>(store);
    src.corpus = std::make_shared<const ContainerCorpus>(store, manifest);
    src.description = {{"kind", "dump"}, {"container", o.container}, {"manifest", o.manifest},
                       {"manifest_report", report.to_json()}};
    log("dump: " + std::to_string(src.corpus->size()) + " utterances, " +
        std::to_string(src.stack->num_layers()) + " transforms, H=" + std::to_string(src.stack->width()));
  } else {
    const SynthConfig cfg = synth_config(o);
    src.synth = generate_corpus(cfg);
    src.synth_stack = build_synth_stack(cfg);
    src.stack = src.synth_stack;
    src.corpus = src.synth->corpus;
    src.description = {{"kind", "synth"}, {"synth", cfg.to_json()}};
    log("synth: " + std::to_string(cfg.n_utterances) + " utterances, " + std::to_string(cfg.n_layers) +
        " layers, H=" + std::to_string(cfg.hidden));
  }
  return src;
}

ScrubConfig scrub_config(const Options& o, bool track) {
  ScrubConfig cfg;
  cfg.eraser = o.eraser;
  cfg.probe = o.probe;
  cfg.track = track;
  cfg.check_determinism = !o.skip_determinism_check;
  cfg.cache_dir = o.cache_dir;
  cfg.chunk_size = o.chunk_size;
  return cfg;
}

class OutputDir {
 public:
  OutputDir(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
    fs::create_directories(dir_);
  }
  const fs::path& path() const { return dir_; }
  void add(const fs::path& p) { files_.push_back(p); }
  void add(const std::vector<fs::path>& ps) { files_.insert(files_.end(), ps.begin(), ps.end()); }
  fs::path write_json(const std::string& name, const nlohmann::json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::trunc) << j.dump(2) << '\n';
    add(p);
    return p;
  }
  void finish(const std::string& effective_config, const nlohmann::json& source) {
    const fs::path cfg = dir_ / "config.toml";
    std::ofstream(cfg, std::ios::trunc) << effective_config;
    add(cfg);
    nlohmann::json listing = nlohmann::json::array();
    for (const auto& f : files_)
      listing.push_back({{"path", fs::relative(f, dir_).generic_string()}, {"bytes", fs::file_size(f)}});
    const nlohmann::json manifest = {{"command", command_}, {"source", source}, {"files", listing}};
    std::ofstream(dir_ / "outputs.json", std::ios::trunc) << manifest.dump(2) << '\n';
    log("wrote " + std::to_string(files_.size()) + " files to " + dir_.string() + " (listed in outputs.json)");
  }

 private:
  fs::path dir_;
  std::string command_;
  std::vector<fs::path> files_;
};

void print_matrix(const ResultMatrix& m) {
  std::printf("%-14s", m.row_title.c_str());
  for (const auto& c : m.col_labels) std::printf(" %13s", c.c_str());
  std::printf("\n");
  for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
    std::printf("%-14s", m.row_labels[r].c_str());
    for (std::size_t c = 0; c < m.col_labels.size(); ++c) std::printf(" %6.3f±%.3f", m.mean(r, c), m.std(r, c));
    std::printf("\n");
  }
}

LinearHead resolve_head(const Options& o, const Source& src) {
  if (!o.head.empty()) return load_head(o.head);
  if (src.synth) return fit_synth_head(*src.synth_stack, *src.synth);
  throw MissingDataError("wer-compare on a dump needs --head");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept erasure, cascade scrubbing and probing for frame-sequence models"};
  app.set_config("--config", "", "Key-value (TOML/INI) file; command-line flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  auto* src_group = "Corpus source";
  app.add_option("--container", o.container, "Embedding container to replay (synthetic corpus if absent)")
      ->group(src_group);
  app.add_option("--manifest", o.manifest, "Label manifest CSV for --container")->group(src_group);
  app.add_option("--head", o.head, "Language head tensor file (wer-compare)")->group(src_group);

  auto* syn = "Synthetic corpus";
  app.add_option("--synth-utterances", o.synth.n_utterances)->capture_default_str()->group(syn);
  app.add_option("--synth-t-min", o.synth.t_min)->capture_default_str()->group(syn);
  app.add_option("--synth-t-max", o.synth.t_max)->capture_default_str()->group(syn);
  app.add_option("--synth-hidden", o.synth.hidden)->capture_default_str()->group(syn);
  app.add_option("--synth-layers", o.synth.n_layers)->capture_default_str()->group(syn);
  app.add_option("--concept-strength", o.synth.concept_strength)->capture_default_str()->group(syn);
  app.add_option("--recovery-layers", o.recovery_layers)->capture_default_str()->delimiter(',')->group(syn);
  app.add_option("--localization-layer", o.synth.localization_layer, "Negative disables")
      ->capture_default_str()
      ->group(syn);
  app.add_option("--linguistic-dim", o.synth.linguistic_dim)->capture_default_str()->group(syn);
  app.add_option("--vocab-size", o.synth.vocab_size)->capture_default_str()->group(syn);
  app.add_option("--speakers", o.synth.n_speakers)->capture_default_str()->group(syn);
  app.add_option("--test-fraction", o.synth.test_fraction)->capture_default_str()->group(syn);
  app.add_option("--concept-in-content", o.synth.concept_in_content,
                 "Class shift written into a content coordinate instead of the concept direction")
      ->capture_default_str()
      ->group(syn);
  app.add_option("--synth-seed", o.synth.seed)->capture_default_str()->group(syn);
  app.add_option("--rotate", o.synth.rotate, "Random orthogonal basis per state (false: identity)")
      ->capture_default_str()
      ->group(syn);

  auto* prb = "Probes and erasure";
  app.add_option("--seeds", o.probe.seeds)->capture_default_str()->delimiter(',')->group(prb);
  app.add_option("--max-epochs", o.probe.max_epochs)->capture_default_str()->group(prb);
  app.add_option("--patience", o.probe.patience)->capture_default_str()->group(prb);
  app.add_option("--tol", o.probe.tol)->capture_default_str()->group(prb);
  app.add_option("--l2", o.probe.l2)->capture_default_str()->group(prb);
  app.add_option("--linear-eta0", o.probe.linear_eta0)->capture_default_str()->group(prb);
  app.add_option("--mlp-hidden", o.probe.hidden_units)->capture_default_str()->group(prb);
  app.add_option("--mlp-lr", o.probe.mlp_learning_rate)->capture_default_str()->group(prb);
  app.add_option("--rank-rtol", o.eraser.rank_rtol, "Whitening cutoff; negative = max(H,k)·eps")
      ->capture_default_str()
      ->group(prb);
  app.add_option("--null-tol", o.eraser.null_tol)->capture_default_str()->group(prb);

  auto* run = "Run";
  app.add_option("--out", o.out, "Output directory")->capture_default_str()->group(run);
  app.add_option("--threads", o.threads, "OpenMP threads (0 = runtime default)")->capture_default_str()->group(run);
  app.add_option("--cache-dir", o.cache_dir, "Cache erased layer outputs here instead of replaying")->group(run);
  app.add_option("--chunk-size", o.chunk_size)->capture_default_str()->group(run);
  app.add_flag("--skip-determinism-check", o.skip_determinism_check)->group(run);

  auto* c_mean = app.add_subcommand("mean-probe", "Mean-pooled linear probe per hidden state");
  auto* c_scrub = app.add_subcommand("scrub", "Fit the cascade of erasers and write a run directory");
  c_scrub->add_flag("--track", o.scrub_track, "Also train the tracking probes");
  auto* c_track = app.add_subcommand("track", "Scrub and report input/output/baseline probes per layer");
  auto* c_snap = app.add_subcommand("snapshot-probe", "Per-position probes at the 10 snapshots");
  c_snap->add_option("--layers", o.layers, "Hidden states to probe (default: all)")->delimiter(',');
  auto* c_cross = app.add_subcommand("cross-probe", "Train at one snapshot position, test at another");
  c_cross->add_option("--layer", o.cross_layer, "Hidden state (default: last)");
  auto* c_wer = app.add_subcommand("wer-compare", "WER through the head before and after scrubbing");
  c_wer->add_option("--run", o.run_dir, "Scrub run directory (scrubs in place if absent)");
  c_wer->add_flag("--no-scrub", o.no_scrub, "Compare the original model with itself");
  auto* c_gen = app.add_subcommand("synth-gen", "Write a synthetic corpus as container + manifest + head");

  CLI11_PARSE(app, argc, argv);

  try {
#ifdef _OPENMP
    if (o.threads > 0) omp_set_num_threads(o.threads);
#endif
    const auto started = std::chrono::steady_clock::now();
    const std::string command = app.get_subcommands().front()->get_name();
    OutputDir out(o.out, command);
    const Source src = open_source(o);
    nlohmann::json summary = {{"command", command}};

    if (*c_mean) {
      const ResultMatrix m = run_mean_probing(*src.stack, *src.corpus, o.probe);
      out.add(m.write(out.path()));
      print_matrix(m);
    } else if (*c_scrub || *c_track) {
      const bool track = *c_track || o.scrub_track;
      ScrubRun r = scrub(*src.stack, *src.corpus, scrub_config(o, track));
      out.add(write_scrub_run(r, out.path() / "run"));
      if (track) {
        const ResultMatrix m = tracking_matrix(r, *src.stack);
        out.add(m.write(out.path()));
        print_matrix(m);
      }
      log("fit " + std::to_string(r.erasers.size()) + " erasers");
    } else if (*c_snap) {
      const ResultMatrix m = run_snapshot_probing(*src.stack, *src.corpus, o.probe, o.layers);
      out.add(m.write(out.path()));
      print_matrix(m);
    } else if (*c_cross) {
      const std::size_t layer =
          o.cross_layer < 0 ? src.stack->num_layers() : static_cast<std::size_t>(o.cross_layer);
      const ResultMatrix m = run_cross_position(*src.stack, *src.corpus, layer, o.probe);
      out.add(m.write(out.path()));
      print_matrix(m);
    } else if (*c_wer) {
      const LinearHead head = resolve_head(o, src);
      std::vector<Eraser> erasers;
      if (!o.no_scrub) {
        if (!o.run_dir.empty()) {
          erasers = load_scrub_erasers(o.run_dir);
        } else {
          ScrubRun r = scrub(*src.stack, *src.corpus, scrub_config(o, false));
          out.add(write_scrub_run(r, out.path() / "run"));
          erasers = std::move(r.erasers);
        }
      }
      const WerComparison cmp = downstream_wer_delta(*src.stack, *src.corpus, head, erasers);
      const std::string name = src.synth ? "synth" : fs::path(o.container).stem().string();
      summary["wer"] = wer_report(cmp, name);
      out.write_json("wer.json", summary["wer"]);
      std::printf("WER original %.4f  scrubbed %.4f  delta %+.4f  (%zu utterances, %zu words)\n", cmp.wer_original,
                  cmp.wer_scrubbed, cmp.wer_scrubbed - cmp.wer_original, cmp.utterances, cmp.reference_words);
    } else if (*c_gen) {
      if (!src.synth) throw Error("synth-gen takes synthetic options, not --container");
      const fs::path container = out.path() / "embeddings.scrb";
      const fs::path manifest = out.path() / "manifest.csv";
      const fs::path head = out.path() / "head.tensor";
      write_synth_dump(*src.synth_stack, *src.synth, container, manifest);
      save_head(fit_synth_head(*src.synth_stack, *src.synth), head);
      out.add({container, manifest, head});
      log("container " + container.string());
    }

    summary["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    out.write_json("summary.json", summary);
    out.finish(app.config_to_str(true, false), src.description);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
