#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "scrubkit/matrix.hpp"

namespace scrubkit {

enum class Split { kTrain, kTest };

const char* to_string(Split split);
Split parse_split(const std::string& s);

/// Per-utterance metadata shared by synthetic and dumped corpora.
struct Utterance {
  std::string id;
  std::string speaker;
  int label = 0;  // index into the corpus class list
  Split split = Split::kTrain;
  std::vector<std::string> transcript;  // words; may be empty
};

/// Feature rows with integer class labels and optional speaker ids.
struct LabeledSet {
  Matrix features;  // n × H
  std::vector<int> labels;
  std::vector<std::string> speakers;  // empty or one per row
  std::size_t num_classes = 2;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  void append(std::span<const double> x, int label, std::string speaker = {});
};

/// Number of distinct labels present.
std::size_t distinct_labels(const std::vector<int>& labels);

/// Throws DataLeakError when any speaker id occurs in both sets.
void check_no_speaker_overlap(const LabeledSet& train, const LabeledSet& test);

}  // namespace scrubkit
