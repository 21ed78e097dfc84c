#include "scrubkit/asr.hpp"

#include <algorithm>

#include "scrubkit/binary_io.hpp"
#include "scrubkit/errors.hpp"
#include "scrubkit/linalg.hpp"
#include "scrubkit/moments.hpp"
#include "scrubkit/scrubber.hpp"

namespace scrubkit {

std::size_t edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

double wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) throw Error("wer: empty reference");
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

std::vector<std::size_t> ctc_greedy_decode(const Matrix& logits, std::size_t blank) {
  if (logits.rows() == 0) throw Error("ctc_greedy_decode: empty logits");
  if (logits.cols() < 2 || blank >= logits.cols()) throw Error("ctc_greedy_decode: need V ≥ 2 and blank < V");
  std::vector<std::size_t> out;
  std::size_t previous = blank;
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const auto row = logits.row(t);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best != blank && best != previous) out.push_back(best);
    previous = best;
  }
  return out;
}

std::vector<std::string> symbols_to_words(const std::vector<std::size_t>& symbols,
                                          const std::vector<std::string>& vocabulary,
                                          const std::string& delimiter) {
  std::vector<std::string> words;
  if (delimiter.empty()) {
    for (auto s : symbols) words.push_back(vocabulary.at(s));
    return words;
  }
  std::string current;
  for (auto s : symbols) {
    const std::string& tok = vocabulary.at(s);
    if (tok == delimiter) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current += tok;
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Matrix LinearHead::logits(const Matrix& frames) const {
  if (frames.cols() != weight.cols()) throw ShapeError("head: frame width differs from head input size");
  Matrix out = matmul(frames, weight.transpose());
  for (std::size_t t = 0; t < out.rows(); ++t)
    for (std::size_t v = 0; v < out.cols(); ++v) out(t, v) += bias[v];
  return out;
}

std::vector<std::string> LinearHead::transcribe(const Matrix& frames) const {
  return symbols_to_words(ctc_greedy_decode(logits(frames), blank), vocabulary, word_delimiter);
}

LinearHead fit_ridge_head(const std::vector<EmbeddingSequence>& sequences,
                          const std::vector<std::vector<std::size_t>>& targets, std::vector<std::string> vocabulary,
                          std::size_t blank, double ridge) {
  if (sequences.empty() || sequences.size() != targets.size())
    throw ShapeError("fit_ridge_head: one target sequence per input sequence required");
  const std::size_t h = sequences.front().width(), v = vocabulary.size();
  if (blank >= v) throw Error("fit_ridge_head: blank outside the vocabulary");
  MomentAccumulator acc(h, v);
  for (std::size_t u = 0; u < sequences.size(); ++u) {
    const auto& seq = sequences[u];
    if (seq.length() != targets[u].size()) throw ShapeError("fit_ridge_head: target length differs from T");
    Matrix z(seq.length(), v);
    for (std::size_t t = 0; t < seq.length(); ++t) z(t, targets[u][t]) = 1.0;
    acc.update_rows(seq.frames, z);
  }
  Matrix sxx = acc.covariance_xx();
  double trace = 0.0;
  for (std::size_t i = 0; i < h; ++i) trace += sxx(i, i);
  const double lambda = ridge * trace / static_cast<double>(h);
  for (std::size_t i = 0; i < h; ++i) sxx(i, i) += lambda;
  const Matrix coef = matmul(linalg::pinv(sxx, 1e-14), acc.covariance_xz());  // H × V

  LinearHead head;
  head.weight = coef.transpose();
  head.bias = acc.mean_z();
  for (std::size_t k = 0; k < v; ++k)
    for (std::size_t i = 0; i < h; ++i) head.bias[k] -= head.weight(k, i) * acc.mean_x()[i];
  head.vocabulary = std::move(vocabulary);
  head.blank = blank;
  return head;
}

void save_head(const LinearHead& head, const std::filesystem::path& path) {
  nlohmann::json header = {{"kind", "head"},
                           {"V", head.vocab_size()},
                           {"H", head.weight.cols()},
                           {"vocabulary", head.vocabulary},
                           {"blank", head.blank},
                           {"word_delimiter", head.word_delimiter}};
  std::vector<io::NamedTensor> tensors;
  tensors.push_back({"weight", {head.weight.rows(), head.weight.cols()},
                     {head.weight.data().begin(), head.weight.data().end()}});
  tensors.push_back({"bias", {head.bias.size()}, head.bias});
  io::write_tensor_file(path, std::move(header), tensors);
}

LinearHead load_head(const std::filesystem::path& path) {
  const io::TensorFile file = io::read_tensor_file(path);
  if (file.header.value("kind", "") != "head")
    throw FormatError(FormatErrorKind::kMalformed, path.string() + " does not hold a language head");
  LinearHead head;
  head.weight = io::to_matrix(file.get("weight"));
  head.bias = file.get("bias").values;
  head.vocabulary = file.header.at("vocabulary").get<std::vector<std::string>>();
  head.blank = file.header.at("blank").get<std::size_t>();
  head.word_delimiter = file.header.value("word_delimiter", std::string{});
  if (head.bias.size() != head.weight.rows() || head.vocabulary.size() != head.bias.size() ||
      head.blank >= head.bias.size())
    throw FormatError(FormatErrorKind::kMalformed, path.string() + ": head shapes disagree");
  return head;
}

WerComparison downstream_wer_delta(const LayerStack& stack, const Corpus& corpus, const LinearHead& head,
                                   const std::vector<Eraser>& erasers) {
  if (!erasers.empty() && erasers.size() != stack.num_layers())
    throw MissingDataError("wer comparison: scrub run has " + std::to_string(erasers.size()) + " erasers for " +
                           std::to_string(stack.num_layers()) + " layers");
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Utterance& u = corpus.utterance(i);
    if (u.split == Split::kTest && !u.transcript.empty()) picked.push_back(i);
  }
  if (picked.empty()) throw MissingDataError("wer comparison: no test utterance has a transcript");

  std::vector<std::size_t> edits_orig(picked.size()), edits_scrub(picked.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t p = 0; p < picked.size(); ++p) {
    try {
      const Utterance& u = corpus.utterance(picked[p]);
      const EmbeddingSequence input = corpus.input(picked[p]);
      const auto recorded = stack.recorded_state(u.id, stack.num_layers());
      const EmbeddingSequence original = recorded ? *recorded : forward_all(stack, input).back();
      edits_orig[p] = edit_distance(u.transcript, head.transcribe(original.frames));
      if (erasers.empty()) {
        edits_scrub[p] = edits_orig[p];
      } else {
        edits_scrub[p] = edit_distance(u.transcript, head.transcribe(scrubbed_output(stack, erasers, input).frames));
      }
    } catch (...) {
#pragma omp critical(scrubkit_wer_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  WerComparison out;
  out.utterances = picked.size();
  std::size_t e_orig = 0, e_scrub = 0;
  for (std::size_t p = 0; p < picked.size(); ++p) {
    out.reference_words += corpus.utterance(picked[p]).transcript.size();
    e_orig += edits_orig[p];
    e_scrub += edits_scrub[p];
  }
  out.wer_original = static_cast<double>(e_orig) / static_cast<double>(out.reference_words);
  out.wer_scrubbed = static_cast<double>(e_scrub) / static_cast<double>(out.reference_words);
  return out;
}

}  // namespace scrubkit
