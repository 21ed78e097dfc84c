#include "scrubkit/dataset.hpp"

#include <set>
#include <unordered_set>

#include "scrubkit/errors.hpp"

namespace scrubkit {

const char* to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw Error("unknown split '" + s + "' (expected train or test)");
}

void LabeledSet::append(std::span<const double> x, int label, std::string speaker) {
  features.append_row(x);
  labels.push_back(label);
  if (!speaker.empty()) speakers.push_back(std::move(speaker));
}

std::size_t distinct_labels(const std::vector<int>& labels) {
  return std::set<int>(labels.begin(), labels.end()).size();
}

void check_no_speaker_overlap(const LabeledSet& train, const LabeledSet& test) {
  if (train.speakers.empty() || test.speakers.empty()) return;
  const std::unordered_set<std::string> seen(train.speakers.begin(), train.speakers.end());
  for (const auto& s : test.speakers) {
    if (seen.contains(s)) throw DataLeakError("speaker '" + s + "' appears in both train and test splits");
  }
}

}  // namespace scrubkit
