#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scrubkit/pooling.hpp"

namespace scrubkit {

inline constexpr char kContainerMagic[5] = {'S', 'C', 'R', 'B', '1'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct ContainerHeader {
  std::uint32_t version = kContainerVersion;
  std::uint32_t hidden = 0;        // H
  std::uint32_t n_layers = 0;      // records per utterance
  std::uint32_t n_utterances = 0;
  nlohmann::json metadata = nlohmann::json::object();

  std::uint64_t record_count() const noexcept { return std::uint64_t{n_layers} * n_utterances; }
};

/// One (utterance, layer) record exactly as stored: T×H row-major f32.
struct ContainerRecord {
  std::string utterance_id;
  std::uint32_t layer = 0;
  std::uint32_t length = 0;  // T
  std::vector<float> values;

  EmbeddingSequence to_sequence(std::size_t hidden) const;
  bool operator==(const ContainerRecord&) const = default;
};

ContainerRecord make_record(const EmbeddingSequence& seq);

/// Streaming writer. The header declares the record count up front and
/// close() checks that exactly that many records were written.
class ContainerWriter {
 public:
  ContainerWriter(const std::filesystem::path& path, ContainerHeader header);
  ContainerWriter(const ContainerWriter&) = delete;
  ContainerWriter& operator=(const ContainerWriter&) = delete;
  ~ContainerWriter();

  void write(const ContainerRecord& record);
  void write(const EmbeddingSequence& seq) { write(make_record(seq)); }
  void close();

  std::uint64_t records_written() const noexcept { return written_; }

 private:
  std::filesystem::path path_;
  ContainerHeader header_;
  std::ofstream out_;
  std::string buffer_;
  std::uint64_t written_ = 0;
  bool closed_ = false;
};

/// Position of a record inside a container file.
struct RecordLocation {
  std::uint64_t offset = 0;
  std::uint32_t length = 0;
};

/// Streaming reader: next() yields one record at a time and reuses a single
/// payload buffer, so memory stays at one record regardless of file size.
class ContainerReader {
 public:
  explicit ContainerReader(const std::filesystem::path& path);

  const ContainerHeader& header() const noexcept { return header_; }

  /// Next record, or nullopt after the last declared record. Detects
  /// truncation, non-finite values (naming the utterance) and trailing or
  /// missing records.
  std::optional<ContainerRecord> next();
  /// Like next() but fills `record` in place; returns false at the end.
  bool next(ContainerRecord& record);

  /// Scans the file, skipping payloads, and maps (utterance, layer) to the
  /// record position. Leaves the stream position unchanged.
  std::map<std::pair<std::string, std::uint32_t>, RecordLocation> build_index();
  /// Reads the record starting at `offset` (as reported by build_index).
  /// Random access moves the stream; do not interleave with next().
  ContainerRecord read_at(std::uint64_t offset);

  /// Largest payload buffer allocated so far, in bytes.
  std::size_t peak_buffer_bytes() const noexcept { return peak_buffer_; }
  std::uint64_t records_read() const noexcept { return read_; }

 private:
  bool read_record(ContainerRecord& record, bool sequential);
  void read_exact(char* dst, std::size_t n, const char* what);

  std::filesystem::path path_;
  std::ifstream in_;
  ContainerHeader header_;
  std::uint64_t data_start_ = 0;
  std::uint64_t file_size_ = 0;
  std::uint64_t read_ = 0;
  std::vector<char> scratch_;
  std::size_t peak_buffer_ = 0;
};

/// Whole-file convenience for small containers.
struct ContainerFile {
  ContainerHeader header;
  std::vector<ContainerRecord> records;
};

ContainerFile read_container(const std::filesystem::path& path);
void write_container(const std::filesystem::path& path, const ContainerFile& file);

/// Streams every record and returns (utterance ids in first-seen order,
/// layers seen). Throws the reader's typed errors.
struct ContainerSummary {
  ContainerHeader header;
  std::vector<std::string> utterance_ids;
  std::vector<std::uint32_t> layers;
};
ContainerSummary scan_container(const std::filesystem::path& path);

}  // namespace scrubkit
