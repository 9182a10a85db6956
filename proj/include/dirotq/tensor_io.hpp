// Copyright 2026 The DiRotQ Authors.
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

// Binary tensor files.
//
//   bytes 0..3   "DRTQ"
//   u16 LE       version (1)
//   u8           dtype: 0 = binary32, 1 = binary64
//   u8           ndim
//   ndim × u64 LE  shape
//   payload      row-major scalars, little-endian
//
// Everything is encoded byte by byte, so files are identical across hosts.

#ifndef DIROTQ_TENSOR_IO_HPP_
#define DIROTQ_TENSOR_IO_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dirotq/error.hpp"
#include "dirotq/linalg.hpp"

namespace dirotq {

inline constexpr char kTensorMagic[4] = {'D', 'R', 'T', 'Q'};
inline constexpr std::uint16_t kTensorVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct Tensor {
  DType dtype = DType::f64;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;  // f32 tensors hold float-representable values

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (std::uint64_t d : shape) n *= d;
    return n;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

namespace detail {

inline void put_le(std::vector<unsigned char>& out, std::uint64_t v,
                   int bytes) {
  for (int i = 0; i < bytes; ++i)
    out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(const std::vector<unsigned char>& in,
                            std::size_t& pos, int bytes,
                            const std::string& what) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) {
    throw FormatError("tensor file truncated while reading " + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_tensor(const Tensor& t) {
  if (t.shape.size() > 255) throw FormatError("tensor has more than 255 dims");
  if (t.values.size() != t.element_count()) {
    throw ShapeError("tensor payload has " + std::to_string(t.values.size()) +
                     " values, shape needs " +
                     std::to_string(t.element_count()));
  }
  std::vector<unsigned char> out(std::begin(kTensorMagic),
                                 std::end(kTensorMagic));
  detail::put_le(out, kTensorVersion, 2);
  out.push_back(static_cast<unsigned char>(t.dtype));
  out.push_back(static_cast<unsigned char>(t.shape.size()));
  for (std::uint64_t d : t.shape) detail::put_le(out, d, 8);
  for (double v : t.values) {
    if (t.dtype == DType::f64) {
      detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    } else {
      const float f = static_cast<float>(v);
      if (static_cast<double>(f) != v && std::isfinite(v)) {
        throw FormatError("value not representable as binary32");
      }
      detail::put_le(out, std::bit_cast<std::uint32_t>(f), 4);
    }
  }
  return out;
}

inline Tensor decode_tensor(const std::vector<unsigned char>& in) {
  if (in.size() < 4 || !std::equal(std::begin(kTensorMagic),
                                   std::end(kTensorMagic), in.begin())) {
    throw FormatError("not a tensor file (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = detail::get_le(in, pos, 2, "version");
  if (version != kTensorVersion) {
    throw FormatError("unsupported tensor file version " +
                      std::to_string(version));
  }
  const auto dtype = detail::get_le(in, pos, 1, "dtype");
  if (dtype > 1) {
    throw FormatError("unknown dtype code " + std::to_string(dtype));
  }
  Tensor t;
  t.dtype = static_cast<DType>(dtype);
  const auto ndim = detail::get_le(in, pos, 1, "ndim");
  for (std::uint64_t i = 0; i < ndim; ++i)
    t.shape.push_back(detail::get_le(in, pos, 8, "shape"));
  const std::uint64_t n = t.element_count();
  const std::size_t width = t.dtype == DType::f64 ? 8 : 4;
  if ((in.size() - pos) / width < n || in.size() - pos != n * width) {
    throw FormatError("tensor payload is " + std::to_string(in.size() - pos) +
                      " bytes, shape needs " + std::to_string(n * width));
  }
  t.values.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (t.dtype == DType::f64) {
      t.values.push_back(
          std::bit_cast<double>(detail::get_le(in, pos, 8, "payload")));
    } else {
      const auto bits =
          static_cast<std::uint32_t>(detail::get_le(in, pos, 4, "payload"));
      t.values.push_back(static_cast<double>(std::bit_cast<float>(bits)));
    }
  }
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const std::vector<unsigned char> bytes = encode_tensor(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed for " + path.string());
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline Tensor to_tensor(const Matrix& m, DType dtype = DType::f64) {
  Tensor t;
  t.dtype = dtype;
  t.shape = {m.rows(), m.cols()};
  t.values = m.data();
  return t;
}

inline Tensor to_tensor(const std::vector<double>& v,
                        DType dtype = DType::f64) {
  Tensor t;
  t.dtype = dtype;
  t.shape = {v.size()};
  t.values = v;
  return t;
}

inline Matrix to_matrix(const Tensor& t) {
  if (t.shape.size() != 2) {
    throw FormatError("expected a 2-d tensor, got " +
                      std::to_string(t.shape.size()) + " dims");
  }
  return Matrix::from_data(t.shape[0], t.shape[1], t.values);
}

inline std::vector<double> to_vector(const Tensor& t) {
  if (t.shape.size() != 1) {
    throw FormatError("expected a 1-d tensor, got " +
                      std::to_string(t.shape.size()) + " dims");
  }
  return t.values;
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  write_tensor(path, to_tensor(m));
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  return to_matrix(read_tensor(path));
}

}  // namespace dirotq

#endif  // DIROTQ_TENSOR_IO_HPP_
