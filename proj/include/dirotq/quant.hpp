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

// Fake quantization (quantize then dequantize) for integer and E2M1 (FP4)
// formats.
//
// A matrix is split into quantization groups according to QuantSpec:
//
//   per_tensor   one group for the whole matrix
//   per_token    one group per row
//   per_channel  one group per column
//   per_group    runs of `group_size` consecutive elements along an axis;
//                along rows for activations (per-token groups), along
//                columns for weights (groups over input channels). A ragged
//                tail group gets its own scale.
//
// Integer codes follow x̂ = round((x − z)/s)·s + z with round-half-to-even
// and clipping. Symmetric: z = 0, s = max|x|/(2^(b−1)−1), codes in
// [−(2^(b−1)−1), 2^(b−1)−1]. Asymmetric: z = min(x), s = (max − min)/(2^b − 1),
// codes in [0, 2^b − 1]. A group with zero range gets s = 1.
//
// float4 groups of 16 snap to the E2M1 grid {0, ±0.5, ±1, ±1.5, ±2, ±3, ±4,
// ±6}. Group scales are snapped to FP8 E4M3 relative to a power-of-two
// per-tensor scale that brings the largest group scale into E4M3 range.

#ifndef DIROTQ_QUANT_HPP_
#define DIROTQ_QUANT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dirotq/error.hpp"
#include "dirotq/linalg.hpp"

namespace dirotq {

enum class NumberFamily { integer, float4 };
enum class QuantMode { symmetric, asymmetric };
enum class Granularity { per_tensor, per_channel, per_token, per_group };
enum class ScaleFormat { real16_emulated, fp8_e4m3_emulated };
enum class GroupAxis { along_rows, along_columns };

struct QuantSpec {
  int bits = 4;
  NumberFamily family = NumberFamily::integer;
  QuantMode mode = QuantMode::symmetric;
  Granularity granularity = Granularity::per_group;
  std::size_t group_size = 64;
  ScaleFormat scale_format = ScaleFormat::real16_emulated;

  static QuantSpec integer(int bits, QuantMode mode, Granularity granularity,
                           std::size_t group_size = 64) {
    QuantSpec s;
    s.bits = bits;
    s.mode = mode;
    s.granularity = granularity;
    s.group_size = group_size;
    return s;
  }

  static QuantSpec nvfp4() {
    QuantSpec s;
    s.bits = 4;
    s.family = NumberFamily::float4;
    s.mode = QuantMode::symmetric;
    s.granularity = Granularity::per_group;
    s.group_size = 16;
    s.scale_format = ScaleFormat::fp8_e4m3_emulated;
    return s;
  }

  void validate() const {
    if (family == NumberFamily::float4) {
      if (bits != 4 || mode != QuantMode::symmetric ||
          granularity != Granularity::per_group || group_size != 16 ||
          scale_format != ScaleFormat::fp8_e4m3_emulated) {
        throw ConfigError(
            "float4 requires bits=4, symmetric, per_group, group_size=16 and "
            "fp8_e4m3_emulated scales");
      }
      return;
    }
    if (bits < 2 || bits > 16) {
      throw ConfigError("integer bits must be in [2, 16], got " +
                        std::to_string(bits));
    }
    if (granularity == Granularity::per_group && group_size == 0) {
      throw ConfigError("per_group quantization needs group_size >= 1");
    }
  }

  int q_min() const {
    if (family == NumberFamily::float4) return -7;
    return mode == QuantMode::symmetric ? -((1 << (bits - 1)) - 1) : 0;
  }
  int q_max() const {
    if (family == NumberFamily::float4) return 7;
    return mode == QuantMode::symmetric ? (1 << (bits - 1)) - 1
                                        : (1 << bits) - 1;
  }

  friend bool operator==(const QuantSpec&, const QuantSpec&) = default;
};

// ---------------------------------------------------------------------------
// Scalar number formats.

// Round half to even, independent of the current floating-point environment.
inline double round_half_even(double v) {
  const double f = std::floor(v);
  const double diff = v - f;
  if (diff < 0.5) return f;
  if (diff > 0.5) return f + 1.0;
  return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;
}

inline constexpr std::array<double, 8> kE2m1Magnitudes = {0.0, 0.5, 1.0, 1.5,
                                                          2.0, 3.0, 4.0, 6.0};

// Signed E2M1 code in [−7, 7]; |code| indexes kE2m1Magnitudes. Ties go to the
// even mantissa (even index); magnitudes past 6 saturate.
inline int snap_e2m1(double v) {
  const double a = std::abs(v);
  int idx = 7;
  if (a < 6.0) {
    idx = 0;
    while (idx < 7 && kE2m1Magnitudes[idx + 1] <= a) ++idx;
    if (idx < 7 && kE2m1Magnitudes[idx] != a) {
      const double lo = kE2m1Magnitudes[idx];
      const double hi = kE2m1Magnitudes[idx + 1];
      const double mid = 0.5 * (lo + hi);
      if (a > mid || (a == mid && (idx + 1) % 2 == 0)) ++idx;
    }
  }
  return v < 0.0 ? -idx : idx;
}

inline double e2m1_value(int code) {
  const double m = kE2m1Magnitudes[static_cast<std::size_t>(std::abs(code))];
  return code < 0 ? -m : m;
}

namespace detail {

// Non-negative E4M3 values (bias 7, no infinities, max 448), ascending.
inline const std::vector<double>& e4m3_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t;
    for (int e = 0; e < 16; ++e) {
      for (int m = 0; m < 8; ++m) {
        if (e == 15 && m == 7) continue;  // NaN encoding
        t.push_back(e == 0 ? std::ldexp(m / 8.0, -6)
                           : std::ldexp(1.0 + m / 8.0, e - 7));
      }
    }
    return t;
  }();
  return table;
}

}  // namespace detail

inline constexpr double kE4m3Max = 448.0;

// Nearest E4M3 value for a non-negative input, ties to even mantissa,
// saturating at 448.
inline double snap_e4m3(double v) {
  const auto& t = detail::e4m3_table();
  if (v <= 0.0) return 0.0;
  if (v >= kE4m3Max) return kE4m3Max;
  const auto it = std::lower_bound(t.begin(), t.end(), v);
  const std::size_t hi = static_cast<std::size_t>(it - t.begin());
  if (t[hi] == v) return v;
  const std::size_t lo = hi - 1;
  const double dlo = v - t[lo];
  const double dhi = t[hi] - v;
  if (dlo < dhi) return t[lo];
  if (dhi < dlo) return t[hi];
  return (lo % 8) % 2 == 0 ? t[lo] : t[hi];
}

// Round through IEEE binary16 (round to nearest even, subnormals, overflow to
// infinity).
inline double round_to_fp16(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  const double a = std::abs(v);
  if (a >= 65520.0) return std::copysign(std::numeric_limits<double>::infinity(), v);
  int exp = 0;
  std::frexp(a, &exp);  // a = f·2^exp, f in [0.5, 1)
  const int e = std::max(exp - 1, -14);
  const double ulp = std::ldexp(1.0, e - 10);
  return std::copysign(round_half_even(a / ulp) * ulp, v);
}

inline Matrix round_to_fp16(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = round_to_fp16(v);
  return out;
}

// ---------------------------------------------------------------------------
// Group layout.

struct GroupLayout {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Granularity granularity = Granularity::per_tensor;
  std::size_t group_size = 0;
  GroupAxis axis = GroupAxis::along_rows;

  std::size_t groups_per_lane() const {
    const std::size_t lane = axis == GroupAxis::along_rows ? cols : rows;
    return lane == 0 ? 0 : (lane + group_size - 1) / group_size;
  }

  std::size_t group_count() const {
    switch (granularity) {
      case Granularity::per_tensor:
        return rows * cols == 0 ? 0 : 1;
      case Granularity::per_token:
        return rows;
      case Granularity::per_channel:
        return cols;
      case Granularity::per_group:
        return (axis == GroupAxis::along_rows ? rows : cols) *
               groups_per_lane();
    }
    return 0;
  }

  std::size_t group_of(std::size_t r, std::size_t c) const {
    switch (granularity) {
      case Granularity::per_tensor:
        return 0;
      case Granularity::per_token:
        return r;
      case Granularity::per_channel:
        return c;
      case Granularity::per_group:
        return axis == GroupAxis::along_rows
                   ? r * groups_per_lane() + c / group_size
                   : c * groups_per_lane() + r / group_size;
    }
    return 0;
  }

  friend bool operator==(const GroupLayout&, const GroupLayout&) = default;
};

inline GroupLayout make_layout(std::size_t rows, std::size_t cols,
                               const QuantSpec& spec,
                               GroupAxis axis = GroupAxis::along_rows) {
  spec.validate();
  return {rows, cols, spec.granularity, spec.group_size, axis};
}

// ---------------------------------------------------------------------------
// Parameters and quantized tensors.

struct QuantParams {
  std::vector<double> scales;       // one per group, > 0
  std::vector<double> zero_points;  // empty when symmetric
  double tensor_scale = 1.0;        // float4 second-level scale, else 1
};

struct QuantizedTensor {
  std::vector<std::int32_t> codes;  // row-major, same shape as the source
  std::vector<double> scales;
  std::vector<double> zero_points;
  double tensor_scale = 1.0;
  GroupLayout layout;
  QuantSpec spec;

  QuantParams params() const { return {scales, zero_points, tensor_scale}; }
};

// Scalar encode/decode against a single group's parameters.
inline std::int32_t encode_value(double v, double scale, double zero,
                                 const QuantSpec& spec) {
  if (spec.family == NumberFamily::float4) return snap_e2m1(v / scale);
  const double q = round_half_even((v - zero) / scale);
  const double clipped =
      std::clamp(q, static_cast<double>(spec.q_min()),
                 static_cast<double>(spec.q_max()));
  return static_cast<std::int32_t>(clipped);
}

inline double decode_value(std::int32_t code, double scale, double zero,
                           const QuantSpec& spec) {
  if (spec.family == NumberFamily::float4) return e2m1_value(code) * scale;
  return static_cast<double>(code) * scale + zero;
}

inline void check_finite(const Matrix& x, const char* what) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x.data()[i])) {
      throw NumericalError(std::string(what) +
                           ": non-finite input at flat index " +
                           std::to_string(i));
    }
  }
}

inline QuantParams fit_params(const Matrix& x, const QuantSpec& spec,
                              GroupAxis axis = GroupAxis::along_rows) {
  check_finite(x, "fit_params");
  const GroupLayout layout = make_layout(x.rows(), x.cols(), spec, axis);
  const std::size_t g = layout.group_count();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lo(g, inf), hi(g, -inf), amax(g, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const std::size_t id = layout.group_of(r, c);
      const double v = x(r, c);
      lo[id] = std::min(lo[id], v);
      hi[id] = std::max(hi[id], v);
      amax[id] = std::max(amax[id], std::abs(v));
    }
  }

  QuantParams p;
  p.scales.assign(g, 1.0);
  if (spec.family == NumberFamily::float4) {
    const double tensor_amax =
        g == 0 ? 0.0 : *std::max_element(amax.begin(), amax.end());
    // Power of two, so on-grid scales stay exact after the product.
    p.tensor_scale =
        tensor_amax > 0.0
            ? std::exp2(std::ceil(std::log2(tensor_amax / (6.0 * kE4m3Max))))
            : 1.0;
    const double smallest = detail::e4m3_table()[1];
    for (std::size_t i = 0; i < g; ++i) {
      if (amax[i] == 0.0) continue;
      double s8 = snap_e4m3(amax[i] / 6.0 / p.tensor_scale);
      if (s8 == 0.0) s8 = smallest;
      p.scales[i] = s8 * p.tensor_scale;
    }
    return p;
  }
  if (spec.mode == QuantMode::symmetric) {
    const double qmax = spec.q_max();
    for (std::size_t i = 0; i < g; ++i)
      if (amax[i] > 0.0) p.scales[i] = amax[i] / qmax;
    return p;
  }
  const double levels = spec.q_max() - spec.q_min();
  p.zero_points.assign(g, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    p.zero_points[i] = lo[i];
    if (hi[i] > lo[i]) p.scales[i] = (hi[i] - lo[i]) / levels;
  }
  return p;
}

inline QuantizedTensor quantize_with_params(
    const Matrix& x, const QuantParams& params, const QuantSpec& spec,
    GroupAxis axis = GroupAxis::along_rows) {
  check_finite(x, "quantize");
  QuantizedTensor q;
  q.layout = make_layout(x.rows(), x.cols(), spec, axis);
  q.spec = spec;
  const std::size_t g = q.layout.group_count();
  const bool asym = spec.family == NumberFamily::integer &&
                    spec.mode == QuantMode::asymmetric;
  if (params.scales.size() != g || (asym && params.zero_points.size() != g)) {
    throw ShapeError("quantization parameters cover " +
                     std::to_string(params.scales.size()) +
                     " groups, layout needs " + std::to_string(g));
  }
  q.scales = params.scales;
  q.zero_points = asym ? params.zero_points : std::vector<double>{};
  q.tensor_scale = params.tensor_scale;
  q.codes.resize(x.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const std::size_t id = q.layout.group_of(r, c);
      q.codes[r * x.cols() + c] = encode_value(
          x(r, c), q.scales[id], asym ? q.zero_points[id] : 0.0, spec);
    }
  }
  return q;
}

inline Matrix dequantize(const QuantizedTensor& q) {
  const GroupLayout& l = q.layout;
  const bool asym = !q.zero_points.empty();
  Matrix out(l.rows, l.cols);
  for (std::size_t r = 0; r < l.rows; ++r) {
    for (std::size_t c = 0; c < l.cols; ++c) {
      const std::size_t id = l.group_of(r, c);
      out(r, c) = decode_value(q.codes[r * l.cols + c], q.scales[id],
                               asym ? q.zero_points[id] : 0.0, q.spec);
    }
  }
  return out;
}

struct QuantResult {
  QuantizedTensor q;
  Matrix x_hat;
};

inline QuantResult quantize_dequantize(const Matrix& x, const QuantSpec& spec,
                                       GroupAxis axis = GroupAxis::along_rows) {
  QuantResult res{quantize_with_params(x, fit_params(x, spec, axis), spec, axis),
                  {}};
  res.x_hat = dequantize(res.q);
  return res;
}

// Squared Frobenius norm of x − x_hat.
inline double quant_error(const Matrix& x, const Matrix& x_hat) {
  check_same_shape(x, x_hat, "quant_error");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data()[i] - x_hat.data()[i];
    s += d * d;
  }
  return s;
}

}  // namespace dirotq

#endif  // DIROTQ_QUANT_HPP_
