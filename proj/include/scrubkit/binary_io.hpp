#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "scrubkit/matrix.hpp"

namespace scrubkit::io {

/// Appends the little-endian bytes of an arithmetic value.
template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

/// Decodes a little-endian value from the first sizeof(T) bytes of `in`.
template <typename T>
T get_le(const char* in) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

/// A named f64 array inside a tensor file.
struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

/// Tensor file: one line of JSON (the header, '\n'-terminated) followed by a
/// blob of little-endian f64 values, tensors concatenated in header order.
/// The header's "tensors" array lists {name, shape}; any other header keys
/// are caller metadata. See docs/format.md.
void write_tensor_file(const std::filesystem::path& path, nlohmann::json header,
                       const std::vector<NamedTensor>& tensors);

struct TensorFile {
  nlohmann::json header;
  std::vector<NamedTensor> tensors;

  const NamedTensor& get(const std::string& name) const;
};

TensorFile read_tensor_file(const std::filesystem::path& path);

Matrix to_matrix(const NamedTensor& t);

}  // namespace scrubkit::io
