#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "scrubkit/eraser.hpp"
#include "scrubkit/stack.hpp"

namespace scrubkit {

/// Word-level Levenshtein distance.
std::size_t edit_distance(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis);

/// edit_distance / |reference|; may exceed 1. Throws on an empty reference.
double wer(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis);

/// Per-frame argmax (first maximum on ties), consecutive repeats collapsed,
/// blanks removed.
std::vector<std::size_t> ctc_greedy_decode(const Matrix& logits, std::size_t blank);

/// Linear output layer over hidden states: logits_t = W x_t + b.
struct LinearHead {
  Matrix weight;  // V × H
  Vector bias;    // V
  std::vector<std::string> vocabulary;
  std::size_t blank = 0;
  /// Empty: every symbol is a word. Otherwise symbols are characters and
  /// this token separates words (e.g. "|" for character CTC models).
  std::string word_delimiter;

  std::size_t vocab_size() const noexcept { return bias.size(); }
  Matrix logits(const Matrix& frames) const;
  std::vector<std::string> transcribe(const Matrix& frames) const;
};

/// Maps decoded symbol ids to words (see LinearHead::word_delimiter).
std::vector<std::string> symbols_to_words(const std::vector<std::size_t>& symbols,
                                          const std::vector<std::string>& vocabulary,
                                          const std::string& word_delimiter);

/// Ridge regression from frames to one-hot frame targets, with intercept.
/// `frame_targets[u][t]` is the symbol id of frame t of sequence u.
/// λ is `ridge` times the mean feature variance.
LinearHead fit_ridge_head(const std::vector<EmbeddingSequence>& sequences,
                          const std::vector<std::vector<std::size_t>>& frame_targets,
                          std::vector<std::string> vocabulary, std::size_t blank, double ridge = 1e-3);

/// Same file convention as erasers: JSON header line (kind "head", V, H,
/// vocabulary, blank, word_delimiter) then f64 weight [V,H] and bias [V].
void save_head(const LinearHead& head, const std::filesystem::path& path);
LinearHead load_head(const std::filesystem::path& path);

struct WerComparison {
  double wer_original = 0.0;
  double wer_scrubbed = 0.0;
  std::size_t utterances = 0;
  std::size_t reference_words = 0;
};

/// Corpus-level WER (total edits / total reference words) of the head on
/// the final hidden state, unmodified and through the scrubbed cascade,
/// over test-split utterances with a transcript. With no erasers both
/// numbers come from the unmodified states.
WerComparison downstream_wer_delta(const LayerStack& stack, const Corpus& corpus, const LinearHead& head,
                                   const std::vector<Eraser>& erasers);

}  // namespace scrubkit
