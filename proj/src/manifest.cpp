#include "scrubkit/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "scrubkit/container.hpp"
#include "scrubkit/errors.hpp"

namespace scrubkit {
namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw Error("manifest line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

std::vector<Utterance> LabelManifest::utterances() const {
  std::vector<Utterance> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    auto it = std::find(classes.begin(), classes.end(), r.gender);
    if (it == classes.end()) throw Error("manifest: utterance " + r.utterance_id + " has unknown class " + r.gender);
    out.push_back(Utterance{r.utterance_id, r.speaker_id, static_cast<int>(it - classes.begin()), r.split,
                            words(r.transcript)});
  }
  return out;
}

LabelManifest read_manifest(const std::filesystem::path& path, std::vector<std::string> classes) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorKind::kIo, "cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(FormatErrorKind::kMalformed, path.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader)
    throw FormatError(FormatErrorKind::kMalformed,
                      path.string() + ": header must be '" + std::string(kManifestHeader) + "'");
  LabelManifest m;
  std::set<std::string> seen_classes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line, line_no);
    if (f.size() == 4) f.emplace_back();
    if (f.size() != 5)
      throw FormatError(FormatErrorKind::kMalformed,
                        path.string() + " line " + std::to_string(line_no) + ": expected 5 fields");
    ManifestRow row{f[0], f[1], f[2], Split::kTrain, f[4]};
    try {
      row.split = parse_split(f[3]);
    } catch (const Error&) {
      throw FormatError(FormatErrorKind::kMalformed,
                        path.string() + " line " + std::to_string(line_no) + ": split must be train or test");
    }
    seen_classes.insert(row.gender);
    m.rows.push_back(std::move(row));
  }
  m.classes = classes.empty() ? std::vector<std::string>(seen_classes.begin(), seen_classes.end()) : std::move(classes);
  return m;
}

void write_manifest(const std::filesystem::path& path, const LabelManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatErrorKind::kIo, "cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.rows)
    out << csv_field(r.utterance_id) << ',' << csv_field(r.speaker_id) << ',' << csv_field(r.gender) << ','
        << to_string(r.split) << ',' << csv_field(r.transcript) << '\n';
  if (!out) throw FormatError(FormatErrorKind::kIo, "write failed on " + path.string());
}

bool ManifestReport::ok() const noexcept {
  return duplicate_ids.empty() && unknown_classes.empty() && leaked_speakers.empty() &&
         missing_from_manifest.empty() && missing_from_container.empty();
}

nlohmann::json ManifestReport::to_json() const {
  auto balance = [](const SplitBalance& b) {
    return nlohmann::json{{"utterances", b.utterances}, {"speakers", b.speakers}};
  };
  return {{"ok", ok()},
          {"rows", rows},
          {"duplicate_ids", duplicate_ids},
          {"unknown_classes", unknown_classes},
          {"leaked_speakers", leaked_speakers},
          {"missing_from_manifest", missing_from_manifest},
          {"missing_from_container", missing_from_container},
          {"train", balance(train)},
          {"test", balance(test)}};
}

std::string ManifestReport::summary() const {
  auto counts = [](const std::map<std::string, std::size_t>& m) {
    std::string s;
    for (const auto& [k, v] : m) s += (s.empty() ? "" : "/") + std::to_string(v);
    return s.empty() ? std::string("0") : s;
  };
  std::string classes;
  for (const auto& [k, v] : train.speakers) classes += (classes.empty() ? "" : "/") + k;
  std::ostringstream out;
  out << "rows " << rows << "; train " << counts(train.utterances) << " utterances, " << counts(train.speakers)
      << " speakers; test " << counts(test.utterances) << " utterances, " << counts(test.speakers) << " speakers";
  if (!classes.empty()) out << " (" << classes << ")";
  if (!ok())
    out << "; problems: " << duplicate_ids.size() << " duplicate ids, " << unknown_classes.size()
        << " unknown classes, " << leaked_speakers.size() << " leaked speakers, " << missing_from_manifest.size()
        << " missing from manifest, " << missing_from_container.size() << " missing from container";
  return out.str();
}

ManifestReport validate_manifest(const LabelManifest& manifest) {
  ManifestReport r;
  r.rows = manifest.rows.size();
  std::set<std::string> ids;
  std::map<std::string, std::set<Split>> speaker_splits;
  std::map<Split, std::map<std::string, std::set<std::string>>> speakers_by_class;
  for (const auto& c : manifest.classes) {
    r.train.utterances[c] = r.test.utterances[c] = 0;
    r.train.speakers[c] = r.test.speakers[c] = 0;
  }
  for (const auto& row : manifest.rows) {
    if (!ids.insert(row.utterance_id).second) r.duplicate_ids.push_back(row.utterance_id);
    if (std::find(manifest.classes.begin(), manifest.classes.end(), row.gender) == manifest.classes.end()) {
      r.unknown_classes.push_back(row.utterance_id);
      continue;
    }
    speaker_splits[row.speaker_id].insert(row.split);
    (row.split == Split::kTrain ? r.train : r.test).utterances[row.gender] += 1;
    speakers_by_class[row.split][row.gender].insert(row.speaker_id);
  }
  for (const auto& [spk, splits] : speaker_splits)
    if (splits.size() > 1) r.leaked_speakers.push_back(spk);
  for (auto& [split, by_class] : speakers_by_class)
    for (auto& [cls, spk] : by_class) (split == Split::kTrain ? r.train : r.test).speakers[cls] = spk.size();
  return r;
}

ManifestReport validate_manifest(const LabelManifest& manifest, const std::vector<std::string>& container_ids) {
  ManifestReport r = validate_manifest(manifest);
  std::set<std::string> in_manifest, in_container(container_ids.begin(), container_ids.end());
  for (const auto& row : manifest.rows) in_manifest.insert(row.utterance_id);
  for (const auto& id : container_ids)
    if (!in_manifest.count(id)) r.missing_from_manifest.push_back(id);
  for (const auto& id : in_manifest)
    if (!in_container.count(id)) r.missing_from_container.push_back(id);
  return r;
}

ManifestReport validate_manifest(const LabelManifest& manifest, const std::filesystem::path& container) {
  return validate_manifest(manifest, scan_container(container).utterance_ids);
}

}  // namespace scrubkit
