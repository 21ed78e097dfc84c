#include "scrubkit/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include "scrubkit/errors.hpp"

namespace scrubkit::io {
namespace {

constexpr const char* kTensorFormat = "scrubkit-tensor";
constexpr int kTensorVersion = 1;

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path, nlohmann::json header,
                       const std::vector<NamedTensor>& tensors) {
  header["format"] = kTensorFormat;
  header["version"] = kTensorVersion;
  header["tensors"] = nlohmann::json::array();
  std::string blob;
  for (const auto& t : tensors) {
    if (element_count(t.shape) != t.values.size())
      throw ShapeError("write_tensor_file: tensor '" + t.name + "' shape does not match its values");
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}});
    for (double v : t.values) {
      if (!std::isfinite(v))
        throw FormatError(FormatErrorKind::kNonFinite, "tensor '" + t.name + "' holds a non-finite value");
      put_le<double>(blob, v);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorKind::kIo, "cannot open " + path.string() + " for writing");
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw FormatError(FormatErrorKind::kIo, "write failed for " + path.string());
}

const NamedTensor& TensorFile::get(const std::string& name) const {
  auto it = std::find_if(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == name; });
  if (it == tensors.end()) throw FormatError(FormatErrorKind::kMalformed, "tensor '" + name + "' not in file");
  return *it;
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(FormatErrorKind::kTruncated, path.string() + ": missing header");

  TensorFile file;
  try {
    file.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::kBadMagic, path.string() + ": header is not JSON (" + e.what() + ")");
  }
  if (!file.header.is_object() || file.header.value("format", "") != kTensorFormat)
    throw FormatError(FormatErrorKind::kBadMagic, path.string() + ": not a scrubkit tensor file");
  if (file.header.value("version", 0) != kTensorVersion)
    throw FormatError(FormatErrorKind::kUnsupportedVersion, path.string());

  for (const auto& spec : file.header.at("tensors")) {
    NamedTensor t;
    t.name = spec.at("name").get<std::string>();
    t.shape = spec.at("shape").get<std::vector<std::size_t>>();
    const std::size_t n = element_count(t.shape);
    std::string bytes(n * sizeof(double), '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
      throw FormatError(FormatErrorKind::kTruncated, path.string() + ": tensor '" + t.name + "' is cut short");
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      t.values[i] = get_le<double>(bytes.data() + i * sizeof(double));
      if (!std::isfinite(t.values[i]))
        throw FormatError(FormatErrorKind::kNonFinite, path.string() + ": tensor '" + t.name + "'");
    }
    file.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(FormatErrorKind::kCountMismatch, path.string() + ": trailing bytes after declared tensors");
  return file;
}

Matrix to_matrix(const NamedTensor& t) {
  if (t.shape.size() == 1) return Matrix(t.shape[0], 1, t.values);
  if (t.shape.size() != 2) throw ShapeError("tensor '" + t.name + "' is not a matrix");
  return Matrix(t.shape[0], t.shape[1], t.values);
}

}  // namespace scrubkit::io
