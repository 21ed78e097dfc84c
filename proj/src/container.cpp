#include "scrubkit/container.hpp"

#include <cmath>
#include <cstring>

#include "scrubkit/binary_io.hpp"
#include "scrubkit/errors.hpp"

namespace scrubkit {
namespace {

constexpr std::size_t kFlushBytes = 1 << 20;
constexpr std::uint32_t kMaxIdBytes = 1 << 16;
constexpr std::uint32_t kMaxMetadataBytes = 1 << 26;

std::string encode_header(const ContainerHeader& h) {
  std::string out(kContainerMagic, sizeof kContainerMagic);
  io::put_le<std::uint32_t>(out, h.version);
  io::put_le<std::uint32_t>(out, h.hidden);
  io::put_le<std::uint32_t>(out, h.n_layers);
  io::put_le<std::uint32_t>(out, h.n_utterances);
  const std::string meta = h.metadata.dump();
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  return out;
}

}  // namespace

EmbeddingSequence ContainerRecord::to_sequence(std::size_t hidden) const {
  if (values.size() != std::size_t{length} * hidden)
    throw ShapeError("record " + utterance_id + ": payload does not hold T×H values");
  Matrix frames(length, hidden);
  for (std::size_t i = 0; i < values.size(); ++i) frames.data()[i] = static_cast<double>(values[i]);
  return EmbeddingSequence{utterance_id, layer, std::move(frames)};
}

ContainerRecord make_record(const EmbeddingSequence& seq) {
  ContainerRecord r;
  r.utterance_id = seq.utterance_id;
  r.layer = static_cast<std::uint32_t>(seq.layer);
  r.length = static_cast<std::uint32_t>(seq.length());
  r.values.resize(seq.frames.size());
  for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = static_cast<float>(seq.frames.data()[i]);
  return r;
}

// ---------------------------------------------------------------- writer

ContainerWriter::ContainerWriter(const std::filesystem::path& path, ContainerHeader header)
    : path_(path), header_(std::move(header)) {
  if (header_.hidden == 0) throw FormatError(FormatErrorKind::kMalformed, "container: H must be positive");
  header_.version = kContainerVersion;
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw FormatError(FormatErrorKind::kIo, "cannot open " + path_.string() + " for writing");
  buffer_ = encode_header(header_);
}

ContainerWriter::~ContainerWriter() {
  if (!closed_ && out_.is_open()) {
    out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    out_.close();
  }
}

void ContainerWriter::write(const ContainerRecord& r) {
  if (closed_) throw Error("container writer already closed");
  if (written_ == header_.record_count())
    throw FormatError(FormatErrorKind::kCountMismatch,
                      path_.string() + ": more records than the declared " + std::to_string(written_));
  if (r.utterance_id.empty() || r.utterance_id.size() > kMaxIdBytes)
    throw FormatError(FormatErrorKind::kMalformed, "container: utterance id must be 1..65536 bytes");
  if (r.values.size() != std::size_t{r.length} * header_.hidden)
    throw ShapeError("record " + r.utterance_id + ": expected " + std::to_string(r.length) + "×" +
                     std::to_string(header_.hidden) + " values");
  for (float v : r.values)
    if (!std::isfinite(v))
      throw FormatError(FormatErrorKind::kNonFinite,
                        "utterance " + r.utterance_id + " layer " + std::to_string(r.layer) + " has a non-finite value");

  io::put_le<std::uint32_t>(buffer_, static_cast<std::uint32_t>(r.utterance_id.size()));
  buffer_ += r.utterance_id;
  io::put_le<std::uint32_t>(buffer_, r.layer);
  io::put_le<std::uint32_t>(buffer_, r.length);
  if constexpr (std::endian::native == std::endian::little) {
    buffer_.append(reinterpret_cast<const char*>(r.values.data()), r.values.size() * sizeof(float));
  } else {
    for (float v : r.values) io::put_le<float>(buffer_, v);
  }
  ++written_;
  if (buffer_.size() >= kFlushBytes) {
    out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    buffer_.clear();
    if (!out_) throw FormatError(FormatErrorKind::kIo, "write failed on " + path_.string());
  }
}

void ContainerWriter::close() {
  if (closed_) return;
  out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  buffer_.clear();
  out_.close();
  closed_ = true;
  if (!out_) throw FormatError(FormatErrorKind::kIo, "write failed on " + path_.string());
  if (written_ != header_.record_count())
    throw FormatError(FormatErrorKind::kCountMismatch, path_.string() + ": wrote " + std::to_string(written_) +
                                                           " records, header declares " +
                                                           std::to_string(header_.record_count()));
}

// ---------------------------------------------------------------- reader

ContainerReader::ContainerReader(const std::filesystem::path& path) : path_(path) {
  std::error_code ec;
  file_size_ = std::filesystem::file_size(path_, ec);
  if (ec) throw FormatError(FormatErrorKind::kIo, "cannot stat " + path_.string() + ": " + ec.message());
  in_.open(path_, std::ios::binary);
  if (!in_) throw FormatError(FormatErrorKind::kIo, "cannot open " + path_.string());

  char magic[sizeof kContainerMagic];
  read_exact(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kContainerMagic, sizeof magic) != 0)
    throw FormatError(FormatErrorKind::kBadMagic, path_.string() + " is not a SCRB1 container");
  char fixed[20];
  read_exact(fixed, sizeof fixed, "header");
  header_.version = io::get_le<std::uint32_t>(fixed);
  if (header_.version != kContainerVersion)
    throw FormatError(FormatErrorKind::kUnsupportedVersion,
                      path_.string() + ": container version " + std::to_string(header_.version));
  header_.hidden = io::get_le<std::uint32_t>(fixed + 4);
  header_.n_layers = io::get_le<std::uint32_t>(fixed + 8);
  header_.n_utterances = io::get_le<std::uint32_t>(fixed + 12);
  const auto meta_len = io::get_le<std::uint32_t>(fixed + 16);
  if (header_.hidden == 0) throw FormatError(FormatErrorKind::kMalformed, path_.string() + ": H is zero");
  if (meta_len > kMaxMetadataBytes || meta_len > file_size_)
    throw FormatError(FormatErrorKind::kTruncated, path_.string() + ": metadata block runs past end of file");
  std::string meta(meta_len, '\0');
  read_exact(meta.data(), meta_len, "metadata");
  try {
    header_.metadata = meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::kMalformed, path_.string() + ": metadata is not JSON: " + e.what());
  }
  data_start_ = sizeof kContainerMagic + sizeof fixed + meta_len;
}

void ContainerReader::read_exact(char* dst, std::size_t n, const char* what) {
  in_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw FormatError(FormatErrorKind::kTruncated, path_.string() + ": file ends inside " + what);
}

bool ContainerReader::read_record(ContainerRecord& r, bool sequential) {
  const std::uint64_t pos = static_cast<std::uint64_t>(in_.tellg());
  if (sequential && read_ == header_.record_count()) {
    if (pos != file_size_)
      throw FormatError(FormatErrorKind::kCountMismatch,
                        path_.string() + ": data after the declared " + std::to_string(read_) + " records");
    return false;
  }
  if (sequential && pos == file_size_)
    throw FormatError(FormatErrorKind::kCountMismatch, path_.string() + ": holds " + std::to_string(read_) +
                                                           " records, header declares " +
                                                           std::to_string(header_.record_count()));
  char u32[4];
  read_exact(u32, 4, "record id length");
  const auto id_len = io::get_le<std::uint32_t>(u32);
  if (id_len == 0 || id_len > kMaxIdBytes)
    throw FormatError(FormatErrorKind::kMalformed, path_.string() + ": bad utterance id length at offset " +
                                                       std::to_string(pos));
  r.utterance_id.resize(id_len);
  read_exact(r.utterance_id.data(), id_len, "utterance id");
  char lt[8];
  read_exact(lt, 8, "record header");
  r.layer = io::get_le<std::uint32_t>(lt);
  r.length = io::get_le<std::uint32_t>(lt + 4);

  const std::uint64_t count = std::uint64_t{r.length} * header_.hidden;
  const std::uint64_t bytes = count * sizeof(float);
  const std::uint64_t here = pos + 4 + id_len + 8;
  if (here + bytes > file_size_)
    throw FormatError(FormatErrorKind::kTruncated,
                      path_.string() + ": record for " + r.utterance_id + " runs past end of file");
  r.values.resize(count);
  peak_buffer_ = std::max<std::size_t>(peak_buffer_, r.values.capacity() * sizeof(float));
  if constexpr (std::endian::native == std::endian::little) {
    read_exact(reinterpret_cast<char*>(r.values.data()), bytes, "record payload");
  } else {
    scratch_.resize(bytes);
    read_exact(scratch_.data(), bytes, "record payload");
    for (std::size_t i = 0; i < count; ++i) r.values[i] = io::get_le<float>(scratch_.data() + 4 * i);
  }
  for (float v : r.values)
    if (!std::isfinite(v))
      throw FormatError(FormatErrorKind::kNonFinite,
                        "utterance " + r.utterance_id + " layer " + std::to_string(r.layer) + " has a non-finite value");
  if (sequential) ++read_;
  return true;
}

std::optional<ContainerRecord> ContainerReader::next() {
  ContainerRecord r;
  if (!next(r)) return std::nullopt;
  return r;
}

bool ContainerReader::next(ContainerRecord& record) { return read_record(record, true); }

std::map<std::pair<std::string, std::uint32_t>, RecordLocation> ContainerReader::build_index() {
  const auto saved_pos = in_.tellg();
  const auto saved_read = read_;
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(data_start_));
  std::map<std::pair<std::string, std::uint32_t>, RecordLocation> index;
  std::uint64_t pos = data_start_;
  for (std::uint64_t i = 0; i < header_.record_count(); ++i) {
    char u32[4];
    if (pos == file_size_)
      throw FormatError(FormatErrorKind::kCountMismatch, path_.string() + ": holds " + std::to_string(i) +
                                                             " records, header declares " +
                                                             std::to_string(header_.record_count()));
    read_exact(u32, 4, "record id length");
    const auto id_len = io::get_le<std::uint32_t>(u32);
    if (id_len == 0 || id_len > kMaxIdBytes)
      throw FormatError(FormatErrorKind::kMalformed, path_.string() + ": bad utterance id length");
    std::string id(id_len, '\0');
    read_exact(id.data(), id_len, "utterance id");
    char lt[8];
    read_exact(lt, 8, "record header");
    const auto layer = io::get_le<std::uint32_t>(lt);
    const auto length = io::get_le<std::uint32_t>(lt + 4);
    const std::uint64_t next = pos + 4 + id_len + 8 + std::uint64_t{length} * header_.hidden * sizeof(float);
    if (next > file_size_)
      throw FormatError(FormatErrorKind::kTruncated, path_.string() + ": record for " + id + " runs past end of file");
    if (!index.emplace(std::pair{id, layer}, RecordLocation{pos, length}).second)
      throw FormatError(FormatErrorKind::kMalformed,
                        path_.string() + ": duplicate record " + id + " layer " + std::to_string(layer));
    pos = next;
    in_.seekg(static_cast<std::streamoff>(pos));
  }
  if (pos != file_size_)
    throw FormatError(FormatErrorKind::kCountMismatch, path_.string() + ": data after the declared records");
  in_.clear();
  in_.seekg(saved_pos);
  read_ = saved_read;
  return index;
}

ContainerRecord ContainerReader::read_at(std::uint64_t offset) {
  if (offset < data_start_ || offset >= file_size_)
    throw FormatError(FormatErrorKind::kMalformed, path_.string() + ": record offset out of range");
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(offset));
  ContainerRecord r;
  read_record(r, false);
  return r;
}

ContainerFile read_container(const std::filesystem::path& path) {
  ContainerReader reader(path);
  ContainerFile file;
  file.header = reader.header();
  while (auto r = reader.next()) file.records.push_back(std::move(*r));
  return file;
}

void write_container(const std::filesystem::path& path, const ContainerFile& file) {
  ContainerWriter writer(path, file.header);
  for (const auto& r : file.records) writer.write(r);
  writer.close();
}

ContainerSummary scan_container(const std::filesystem::path& path) {
  ContainerReader reader(path);
  ContainerSummary s;
  s.header = reader.header();
  std::map<std::string, bool> seen;
  std::map<std::uint32_t, bool> layers;
  ContainerRecord r;
  while (reader.next(r)) {
    if (!seen.count(r.utterance_id)) {
      seen[r.utterance_id] = true;
      s.utterance_ids.push_back(r.utterance_id);
    }
    layers[r.layer] = true;
  }
  for (const auto& [l, _] : layers) s.layers.push_back(l);
  return s;
}

}  // namespace scrubkit
