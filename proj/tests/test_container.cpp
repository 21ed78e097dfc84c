#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "scrubkit/container.hpp"
#include "scrubkit/errors.hpp"
#include "test_util.hpp"

using namespace scrubkit;
using scrubkit::testing::TempDir;

namespace {

ContainerFile random_container(std::uint64_t seed, std::uint32_t h, std::uint32_t layers, std::uint32_t utts,
                               std::uint32_t t_max) {
  Rng rng(seed);
  ContainerFile f;
  f.header.hidden = h;
  f.header.n_layers = layers;
  f.header.n_utterances = utts;
  f.header.metadata = {{"seed", seed}, {"note", "random"}};
  for (std::uint32_t u = 0; u < utts; ++u) {
    const auto t = static_cast<std::uint32_t>(1 + rng.below(t_max));
    for (std::uint32_t l = 0; l < layers; ++l) {
      ContainerRecord r;
      r.utterance_id = "utt-" + std::to_string(seed) + "-" + std::to_string(u);
      r.layer = l * 3;
      r.length = t;
      r.values.resize(std::size_t{t} * h);
      // full f32 range including subnormals and signed zero
      for (float& v : r.values) {
        const double pick = rng.uniform();
        if (pick < 0.01) v = -0.0f;
        else if (pick < 0.02) v = std::numeric_limits<float>::denorm_min() * static_cast<float>(1 + rng.below(100));
        else if (pick < 0.03) v = std::numeric_limits<float>::max() * static_cast<float>(rng.uniform(-1, 1));
        else v = static_cast<float>(rng.normal(0.0, 10.0));
      }
      f.records.push_back(std::move(r));
    }
  }
  return f;
}

bool bit_identical(const ContainerRecord& a, const ContainerRecord& b) {
  return a.utterance_id == b.utterance_id && a.layer == b.layer && a.length == b.length &&
         a.values.size() == b.values.size() &&
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
}

FormatErrorKind read_failure(const std::filesystem::path& p) {
  try {
    read_container(p);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no FormatError for " << p);
  return FormatErrorKind::kIo;
}

}  // namespace

TEST_CASE("container round trip is bit identical") {
  TempDir tmp("container");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ContainerFile f = random_container(seed, 3 + static_cast<std::uint32_t>(seed), 3, 7, 40);
    const auto path = tmp / ("c" + std::to_string(seed));
    write_container(path, f);
    const ContainerFile g = read_container(path);
    CHECK(g.header.hidden == f.header.hidden);
    CHECK(g.header.n_layers == f.header.n_layers);
    CHECK(g.header.n_utterances == f.header.n_utterances);
    CHECK(g.header.metadata == f.header.metadata);
    REQUIRE(g.records.size() == f.records.size());
    for (std::size_t i = 0; i < f.records.size(); ++i) CHECK(bit_identical(f.records[i], g.records[i]));
    // rewriting what was read gives the same bytes
    write_container(tmp / "again", g);
    CHECK(slurp(path) == slurp(tmp / "again"));
  }
}

TEST_CASE("container layout matches the documented byte offsets") {
  TempDir tmp("container");
  ContainerFile f;
  f.header.hidden = 2;
  f.header.n_layers = 1;
  f.header.n_utterances = 1;
  f.header.metadata = nlohmann::json::object();
  f.records.push_back(ContainerRecord{"ab", 7, 1, {1.0f, -2.0f}});
  write_container(tmp / "x", f);
  const std::string b = slurp(tmp / "x");
  const std::string meta = "{}";
  // magic(5) version H layers utts metalen (5×4) meta idlen id layer T payload
  REQUIRE(b.size() == 5 + 20 + meta.size() + 4 + 2 + 4 + 4 + 8);
  CHECK(b.substr(0, 5) == "SCRB1");
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[off + i]);
    return v;
  };
  CHECK(u32(5) == 1);
  CHECK(u32(9) == 2);
  CHECK(u32(13) == 1);
  CHECK(u32(17) == 1);
  CHECK(u32(21) == meta.size());
  CHECK(b.substr(25, 2) == meta);
  CHECK(u32(27) == 2);
  CHECK(b.substr(31, 2) == "ab");
  CHECK(u32(33) == 7);
  CHECK(u32(37) == 1);
  CHECK(u32(41) == 0x3f800000u);  // 1.0f
  CHECK(u32(45) == 0xc0000000u);  // -2.0f
}

TEST_CASE("container fault injection yields typed errors") {
  TempDir tmp("container");
  const ContainerFile f = random_container(9, 4, 2, 3, 6);
  const auto good = tmp / "good";
  write_container(good, f);
  const std::string bytes = slurp(good);

  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    spit(tmp / "bad", b);
    CHECK(read_failure(tmp / "bad") == FormatErrorKind::kBadMagic);
  }
  SUBCASE("unsupported version") {
    std::string b = bytes;
    b[5] = 2;
    spit(tmp / "bad", b);
    CHECK(read_failure(tmp / "bad") == FormatErrorKind::kUnsupportedVersion);
  }
  SUBCASE("every truncation point") {
    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
      spit(tmp / "cut", bytes.substr(0, cut));
      const auto kind = read_failure(tmp / "cut");
      const bool typed = kind == FormatErrorKind::kTruncated || kind == FormatErrorKind::kCountMismatch;
      CHECK_MESSAGE(typed, "cut at " << cut << " gave " << to_string(kind));
    }
  }
  SUBCASE("non-finite value names the utterance") {
    std::string b = bytes;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(b.data() + b.size() - 4, &nan, 4);
    spit(tmp / "bad", b);
    try {
      read_container(tmp / "bad");
      FAIL("expected an error");
    } catch (const FormatError& e) {
      CHECK(e.kind() == FormatErrorKind::kNonFinite);
      CHECK(std::string(e.what()).find(f.records.back().utterance_id) != std::string::npos);
    }
  }
  SUBCASE("declared count larger than stored") {
    std::string b = bytes;
    b[17] = static_cast<char>(b[17] + 1);  // n_utterances
    spit(tmp / "bad", b);
    CHECK(read_failure(tmp / "bad") == FormatErrorKind::kCountMismatch);
  }
  SUBCASE("trailing data") {
    spit(tmp / "bad", bytes + std::string(3, '\0'));
    CHECK(read_failure(tmp / "bad") == FormatErrorKind::kCountMismatch);
  }
  SUBCASE("malformed metadata") {
    std::string b = bytes;
    b[25] = '!';
    spit(tmp / "bad", b);
    CHECK(read_failure(tmp / "bad") == FormatErrorKind::kMalformed);
  }
  SUBCASE("missing file") { CHECK(read_failure(tmp / "absent") == FormatErrorKind::kIo); }
}

TEST_CASE("container writer rejects bad input") {
  TempDir tmp("container");
  ContainerHeader h;
  h.hidden = 2;
  h.n_layers = 1;
  h.n_utterances = 2;
  SUBCASE("non-finite") {
    ContainerWriter w(tmp / "w", h);
    try {
      w.write(ContainerRecord{"u-nan", 0, 1, {0.0f, std::numeric_limits<float>::infinity()}});
      FAIL("expected an error");
    } catch (const FormatError& e) {
      CHECK(e.kind() == FormatErrorKind::kNonFinite);
      CHECK(std::string(e.what()).find("u-nan") != std::string::npos);
    }
  }
  SUBCASE("record count checked on close") {
    ContainerWriter w(tmp / "w", h);
    w.write(ContainerRecord{"u0", 0, 1, {0.0f, 1.0f}});
    try {
      w.close();
      FAIL("expected an error");
    } catch (const FormatError& e) {
      CHECK(e.kind() == FormatErrorKind::kCountMismatch);
    }
  }
  SUBCASE("payload size must equal T×H") {
    ContainerWriter w(tmp / "w", h);
    CHECK_THROWS_AS(w.write(ContainerRecord{"u0", 0, 2, {0.0f, 1.0f}}), ShapeError);
  }
}

TEST_CASE("container index gives random access") {
  TempDir tmp("container");
  const ContainerFile f = random_container(21, 5, 4, 6, 12);
  write_container(tmp / "c", f);
  ContainerReader reader(tmp / "c");
  const auto index = reader.build_index();
  REQUIRE(index.size() == f.records.size());
  for (auto it = f.records.rbegin(); it != f.records.rend(); ++it) {
    const auto& loc = index.at({it->utterance_id, it->layer});
    CHECK(loc.length == it->length);
    CHECK(bit_identical(reader.read_at(loc.offset), *it));
  }
  CHECK_THROWS_AS(reader.read_at(1), FormatError);
}

TEST_CASE("streaming reader keeps one record in memory") {
  TempDir tmp("container");
  ContainerHeader h;
  h.hidden = 64;
  h.n_layers = 2;
  h.n_utterances = 200;
  ContainerWriter w(tmp / "big", h);
  Rng rng(3);
  for (std::uint32_t u = 0; u < h.n_utterances; ++u)
    for (std::uint32_t l = 0; l < h.n_layers; ++l) {
      ContainerRecord r{"u" + std::to_string(u), l, 50, std::vector<float>(50 * 64)};
      for (float& v : r.values) v = static_cast<float>(rng.normal());
      w.write(r);
    }
  w.close();
  ContainerReader reader(tmp / "big");
  ContainerRecord r;
  while (reader.next(r)) {
  }
  CHECK(reader.records_read() == 400);
  CHECK(reader.peak_buffer_bytes() == 50 * 64 * sizeof(float));
}

TEST_CASE("scan_container and sequence conversion") {
  TempDir tmp("container");
  const ContainerFile f = random_container(4, 3, 2, 5, 9);
  write_container(tmp / "c", f);
  const ContainerSummary s = scan_container(tmp / "c");
  CHECK(s.utterance_ids.size() == 5);
  CHECK(s.layers == std::vector<std::uint32_t>{0, 3});
  const EmbeddingSequence seq = f.records[0].to_sequence(3);
  CHECK(seq.length() == f.records[0].length);
  CHECK(seq.frames(0, 2) == static_cast<double>(f.records[0].values[2]));
  CHECK(make_record(seq) == f.records[0]);
}
