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

// Error metrology. QSNR is 10·log10(‖X‖²_F / ‖X − X̂‖²_F) in dB; exact
// reconstructions report kQsnrCapDb instead of +inf.

#ifndef DIROTQ_METRICS_HPP_
#define DIROTQ_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dirotq/error.hpp"
#include "dirotq/linalg.hpp"
#include "dirotq/quant.hpp"

namespace dirotq {

inline constexpr double kQsnrCapDb = 300.0;

// 10·log10(signal / error) clamped to ±cap. A zero error (including the
// 0/0 case) reports the cap.
inline double capped_db(double signal, double error) {
  if (error == 0.0) return kQsnrCapDb;
  if (signal == 0.0) return -kQsnrCapDb;
  return std::clamp(10.0 * std::log10(signal / error), -kQsnrCapDb,
                    kQsnrCapDb);
}

inline double qsnr_db(const Matrix& reference, const Matrix& approx) {
  check_same_shape(reference, approx, "qsnr_db");
  const double signal = frobenius_sq(reference);
  if (signal == 0.0) throw ConfigError("qsnr_db: reference is all zero");
  return capped_db(signal, quant_error(reference, approx));
}

inline double psnr_db(const Matrix& reference, const Matrix& approx,
                      double max_value) {
  check_same_shape(reference, approx, "psnr_db");
  if (!(max_value > 0.0)) throw ConfigError("psnr_db: max_value must be > 0");
  if (reference.empty()) throw ShapeError("psnr_db: empty input");
  const double mse =
      quant_error(reference, approx) / static_cast<double>(reference.size());
  return capped_db(max_value * max_value, mse);
}

struct ChannelErrors {
  std::vector<double> per_channel;  // squared error summed over rows
  double total = 0.0;
};

// Columns [0, k) go through spec_high (nullopt = pass-through), the rest
// through spec_low. Activation-style per-token groups in both branches.
inline ChannelErrors channel_error_decomposition(
    const Matrix& x_rot, const std::optional<QuantSpec>& spec_high,
    const QuantSpec& spec_low, std::size_t k) {
  if (k > x_rot.cols()) {
    throw ShapeError("channel_error_decomposition: k=" + std::to_string(k) +
                     " exceeds " + std::to_string(x_rot.cols()) + " columns");
  }
  ChannelErrors out;
  out.per_channel.assign(x_rot.cols(), 0.0);
  auto add_branch = [&](std::size_t begin, std::size_t end,
                        const std::optional<QuantSpec>& spec) {
    if (begin == end || !spec) return;
    const Matrix part = column_slice(x_rot, begin, end);
    const Matrix hat = quantize_dequantize(part, *spec).x_hat;
    for (std::size_t r = 0; r < part.rows(); ++r) {
      for (std::size_t c = 0; c < part.cols(); ++c) {
        const double d = part(r, c) - hat(r, c);
        out.per_channel[begin + c] += d * d;
      }
    }
  };
  add_branch(0, k, spec_high);
  add_branch(k, x_rot.cols(), spec_low);
  for (double e : out.per_channel) out.total += e;
  return out;
}

namespace detail {

// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace detail

// Spearman rank correlation (Pearson on average ranks).
inline double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ShapeError("spearman_rho: need two equal-length sequences of >= 2");
  }
  const std::vector<double> ra = detail::ranks(a);
  const std::vector<double> rb = detail::ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw ConfigError("spearman_rho: constant input has no rank correlation");
  }
  return sab / std::sqrt(saa * sbb);
}

struct BranchBreakdown {
  double high_db = kQsnrCapDb;
  double low_db = kQsnrCapDb;
};

struct QsnrReport {
  std::string layer_id;
  std::size_t timestep = 0;
  std::string method_label;
  std::string side;  // "output" or "input"
  double qsnr_db = 0.0;
  std::optional<BranchBreakdown> branch_breakdown;
};

}  // namespace dirotq

#endif  // DIROTQ_METRICS_HPP_
