#include <doctest.h>

#include <fstream>

#include "scrubkit/container.hpp"
#include "scrubkit/errors.hpp"
#include "scrubkit/manifest.hpp"
#include "scrubkit/probes.hpp"
#include "test_util.hpp"

using namespace scrubkit;
using scrubkit::testing::TempDir;

namespace {

// 462 train speakers (326 male, 136 female) and 168 test speakers (112/56),
// ten utterances each.
LabelManifest timit_shaped() {
  LabelManifest m;
  m.classes = {"female", "male"};
  auto add = [&](Split split, const std::string& gender, std::size_t speakers, const std::string& tag) {
    for (std::size_t s = 0; s < speakers; ++s)
      for (std::size_t u = 0; u < 10; ++u) {
        const std::string spk = tag + gender[0] + std::to_string(s);
        m.rows.push_back({spk + "_" + std::to_string(u), spk, gender, split, "she had your dark suit"});
      }
  };
  add(Split::kTrain, "male", 326, "tr");
  add(Split::kTrain, "female", 136, "tr");
  add(Split::kTest, "male", 112, "te");
  add(Split::kTest, "female", 56, "te");
  return m;
}

}  // namespace

TEST_CASE("TIMIT-shaped manifest balance") {
  const LabelManifest m = timit_shaped();
  const ManifestReport r = validate_manifest(m);
  CHECK(r.ok());
  CHECK(r.rows == 6300);
  CHECK(r.train.utterances.at("male") + r.train.utterances.at("female") == 4620);
  CHECK(r.test.utterances.at("male") + r.test.utterances.at("female") == 1680);
  CHECK(r.train.speakers.at("male") == 326);
  CHECK(r.train.speakers.at("female") == 136);
  CHECK(r.test.speakers.at("male") == 112);
  CHECK(r.test.speakers.at("female") == 56);
  CHECK(r.summary().find("136/326 speakers") != std::string::npos);

  std::vector<int> test_labels;
  for (const auto& u : m.utterances())
    if (u.split == Split::kTest) test_labels.push_back(u.label);
  // male share 2/3 of test utterances
  CHECK(majority_baseline_f1(test_labels) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("manifest problems are reported") {
  LabelManifest m = timit_shaped();
  m.rows[5].split = Split::kTest;  // speaker now in both splits
  m.rows.push_back(m.rows[0]);     // duplicate id
  m.rows.push_back({"x1", "spkx", "unknown", Split::kTrain, ""});
  const ManifestReport r = validate_manifest(m);
  CHECK_FALSE(r.ok());
  CHECK(r.leaked_speakers == std::vector<std::string>{m.rows[5].speaker_id});
  CHECK(r.duplicate_ids == std::vector<std::string>{m.rows[0].utterance_id});
  CHECK(r.unknown_classes == std::vector<std::string>{"x1"});
  CHECK(r.to_json().at("ok") == false);
}

TEST_CASE("manifest coverage against container ids") {
  LabelManifest m;
  m.classes = {"f", "m"};
  m.rows = {{"a", "s1", "f", Split::kTrain, ""}, {"b", "s2", "m", Split::kTest, ""}};
  const ManifestReport r = validate_manifest(m, std::vector<std::string>{"a", "c"});
  CHECK(r.missing_from_manifest == std::vector<std::string>{"c"});
  CHECK(r.missing_from_container == std::vector<std::string>{"b"});
  CHECK_FALSE(r.ok());

  TempDir tmp("manifest");
  ContainerFile f;
  f.header.hidden = 1;
  f.header.n_layers = 1;
  f.header.n_utterances = 2;
  f.records = {{"a", 0, 1, {1.0f}}, {"b", 0, 1, {2.0f}}};
  write_container(tmp / "c", f);
  CHECK(validate_manifest(m, tmp / "c").ok());
}

TEST_CASE("manifest CSV round trip with quoting") {
  TempDir tmp("manifest");
  LabelManifest m;
  m.classes = {"female", "male"};
  m.rows = {{"u1", "s1", "male", Split::kTrain, "hello, \"world\""},
            {"u2", "s2", "female", Split::kTest, ""},
            {"u,3", "s3", "male", Split::kTest, "a b c"}};
  write_manifest(tmp / "m.csv", m);
  const LabelManifest back = read_manifest(tmp / "m.csv");
  CHECK(back.classes == m.classes);
  REQUIRE(back.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.rows[i].utterance_id == m.rows[i].utterance_id);
    CHECK(back.rows[i].speaker_id == m.rows[i].speaker_id);
    CHECK(back.rows[i].gender == m.rows[i].gender);
    CHECK(back.rows[i].split == m.rows[i].split);
    CHECK(back.rows[i].transcript == m.rows[i].transcript);
  }
  const auto utts = back.utterances();
  CHECK(utts[0].label == 1);
  CHECK(utts[1].label == 0);
  CHECK(utts[2].transcript == std::vector<std::string>{"a", "b", "c"});
  CHECK(utts[1].transcript.empty());
}

TEST_CASE("manifest read errors") {
  TempDir tmp("manifest");
  auto write = [&](const std::string& text) {
    std::ofstream(tmp / "m.csv", std::ios::trunc) << text;
    return tmp / "m.csv";
  };
  CHECK_THROWS_AS(read_manifest(tmp / "absent.csv"), FormatError);
  CHECK_THROWS_AS(read_manifest(write("")), FormatError);
  CHECK_THROWS_AS(read_manifest(write("id,speaker\nu,s\n")), FormatError);
  CHECK_THROWS_AS(read_manifest(write(std::string(kManifestHeader) + "\nu1,s1,male\n")), FormatError);
  CHECK_THROWS_AS(read_manifest(write(std::string(kManifestHeader) + "\nu1,s1,male,dev,\n")), Error);
  CHECK_THROWS_AS(read_manifest(write(std::string(kManifestHeader) + "\nu1,s1,male,train,\"open\n")), Error);
  // explicit class order must cover the file
  CHECK_THROWS_AS(read_manifest(write(std::string(kManifestHeader) + "\nu1,s1,other,train,\n"), {"f", "m"}).utterances(),
                  Error);
}
