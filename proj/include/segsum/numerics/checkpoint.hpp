// Copyright 2026 The Segsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary checkpoint layout (all integers and reals little-endian):
//
//   char[8]  magic "SEGSUMCK"
//   u32      format version
//   u8       bytes per stored real (4 or 8)
//   u64      config length, then that many bytes of JSON
//   u64      tensor count, then per tensor:
//              u32 name length, name bytes
//              u32 rank, u64 dims[rank]
//              real values[prod(dims)]

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "segsum/io.hpp"
#include "segsum/numerics/optim.hpp"

namespace segsum::numerics {

inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'G', 'S', 'U', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct CheckpointData {
  std::string config_json;
  std::uint8_t real_bytes = 4;
  std::vector<NamedArray> arrays;
};

namespace detail {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated file");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
std::string serialize_checkpoint(const ParameterSet<T>& params,
                                 const std::string& config_json) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint8_t>(out, sizeof(T));
  detail::put_le<std::uint64_t>(out, config_json.size());
  out += config_json;
  detail::put_le<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    const Shape& shape = p.tensor.shape();
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t dim : shape) detail::put_le<std::uint64_t>(out, dim);
    for (T v : p.tensor.values()) {
      if constexpr (sizeof(T) == 4) {
        detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
      } else {
        detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
      }
    }
  }
  return out;
}

inline CheckpointData parse_checkpoint(std::string_view bytes) {
  detail::ByteReader reader(bytes);
  if (reader.take(sizeof(kCheckpointMagic)) !=
      std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw DataError("checkpoint: bad magic header");
  }
  const auto version = reader.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  }
  CheckpointData data;
  data.real_bytes = reader.get<std::uint8_t>();
  if (data.real_bytes != 4 && data.real_bytes != 8) {
    throw DataError("checkpoint: unsupported real width " + std::to_string(data.real_bytes));
  }
  data.config_json = std::string(reader.take(reader.get<std::uint64_t>()));
  const auto count = reader.get<std::uint64_t>();
  for (std::uint64_t t = 0; t < count; ++t) {
    NamedArray array;
    array.name = std::string(reader.take(reader.get<std::uint32_t>()));
    const auto rank = reader.get<std::uint32_t>();
    for (std::uint32_t r = 0; r < rank; ++r) array.shape.push_back(reader.get<std::uint64_t>());
    const std::size_t n = shape_size(array.shape);
    array.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      array.values[i] = data.real_bytes == 4
                            ? static_cast<double>(std::bit_cast<float>(reader.get<std::uint32_t>()))
                            : std::bit_cast<double>(reader.get<std::uint64_t>());
    }
    data.arrays.push_back(std::move(array));
  }
  if (!reader.done()) throw DataError("checkpoint: trailing bytes");
  return data;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterSet<T>& params,
                     const std::string& config_json) {
  atomic_write_file(path, serialize_checkpoint(params, config_json));
}

inline CheckpointData load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

// Copies stored arrays into `params`; names and shapes must match exactly.
template <typename T>
void restore_parameters(const CheckpointData& data, ParameterSet<T>& params) {
  if (data.arrays.size() != params.size()) {
    throw DataError("checkpoint: holds " + std::to_string(data.arrays.size()) +
                    " tensors, model expects " + std::to_string(params.size()));
  }
  for (const auto& array : data.arrays) {
    Parameter<T>* param = params.find(array.name);
    if (!param) throw DataError("checkpoint: unknown tensor '" + array.name + "'");
    if (param->tensor.shape() != array.shape) {
      throw DataError("checkpoint: tensor '" + array.name + "' has shape " +
                      shape_string(array.shape) + ", model expects " +
                      shape_string(param->tensor.shape()));
    }
    auto dst = param->tensor.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(array.values[i]);
  }
}

}  // namespace segsum::numerics
