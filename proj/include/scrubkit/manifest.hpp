#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scrubkit/dataset.hpp"

namespace scrubkit {

inline constexpr const char* kManifestHeader = "utterance_id,speaker_id,gender,split,transcript";

struct ManifestRow {
  std::string utterance_id;
  std::string speaker_id;
  std::string gender;
  Split split = Split::kTrain;
  std::string transcript;  // space-separated words, may be empty
};

/// Label manifest; `classes` fixes the class order (index = label).
struct LabelManifest {
  std::vector<std::string> classes;
  std::vector<ManifestRow> rows;

  /// Utterance metadata with labels resolved against `classes`.
  std::vector<Utterance> utterances() const;
};

/// Reads the CSV. When `classes` is empty the distinct genders in the file
/// become the classes, sorted. Fields may be double-quoted.
LabelManifest read_manifest(const std::filesystem::path& path, std::vector<std::string> classes = {});
void write_manifest(const std::filesystem::path& path, const LabelManifest& manifest);

/// Speaker and utterance counts per class in one split.
struct SplitBalance {
  std::map<std::string, std::size_t> utterances;
  std::map<std::string, std::size_t> speakers;
};

struct ManifestReport {
  std::size_t rows = 0;
  std::vector<std::string> duplicate_ids;
  std::vector<std::string> unknown_classes;        // utterance ids
  std::vector<std::string> leaked_speakers;        // in both splits
  std::vector<std::string> missing_from_manifest;  // in container, not manifest
  std::vector<std::string> missing_from_container; // in manifest, not container
  SplitBalance train, test;

  bool ok() const noexcept;
  nlohmann::json to_json() const;
  /// Human-readable summary, e.g. "train 326/136 speakers".
  std::string summary() const;
};

/// Pure check of a manifest on its own (no coverage information).
ManifestReport validate_manifest(const LabelManifest& manifest);
/// Manifest against the utterance ids of a container.
ManifestReport validate_manifest(const LabelManifest& manifest, const std::vector<std::string>& container_ids);
ManifestReport validate_manifest(const LabelManifest& manifest, const std::filesystem::path& container);

}  // namespace scrubkit
