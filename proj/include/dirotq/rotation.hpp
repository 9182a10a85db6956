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

// Rotated, split linear layers.
//
// With a PCA basis U = [U_h | U_l] (k leading columns kept in high precision)
// and a random orthogonal R on the residual subspace, V = [U_h | U_l·R] is
// orthogonal and
//
//   X·W = X·V·Vᵀ·W = (X·U_h)·(U_hᵀW) + (X·U_l·R)·((U_l·R)ᵀW).
//
// The two weight slabs are formed offline; only the residual slab is
// quantized. At inference x·U_h stays high precision and x·U_l·R is
// quantized per token, fitted on the fly.

#ifndef DIROTQ_ROTATION_HPP_
#define DIROTQ_ROTATION_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "dirotq/calib.hpp"
#include "dirotq/error.hpp"
#include "dirotq/gptq.hpp"
#include "dirotq/linalg.hpp"
#include "dirotq/metrics.hpp"
#include "dirotq/quant.hpp"
#include "dirotq/synth.hpp"

namespace dirotq {

// Residual rotations keyed by (dimension, seed). Every layer with the same
// residual dimension and seed gets the same shared matrix. Lookups and
// inserts are mutex-guarded.
class OrthogonalCache {
 public:
  std::shared_ptr<const Matrix> get(std::size_t dim, std::uint64_t seed) {
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = entries_[{dim, seed}];
    if (!slot) slot = std::make_shared<const Matrix>(random_orthogonal(dim, seed));
    return slot;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
  }

  void clear() {
    std::lock_guard<std::mutex> lock(mu_);
    entries_.clear();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::shared_ptr<const Matrix>>
      entries_;
};

inline OrthogonalCache& default_orthogonal_cache() {
  static OrthogonalCache cache;
  return cache;
}

struct RotationBundle {
  Matrix v;  // m×m, columns [U_h | U_l·R]
  std::size_t rank_k = 0;
  std::uint64_t r_seed = 0;
  std::size_t residual_dim = 0;
  std::shared_ptr<const Matrix> residual_rotation;  // null when k = m

  std::size_t dim() const { return v.rows(); }
  Matrix high_basis() const { return column_slice(v, 0, rank_k); }
  Matrix low_basis() const { return column_slice(v, rank_k, v.cols()); }
};

// From an explicit orthonormal basis (columns) and rank.
inline RotationBundle build_rotation(const Matrix& u, std::size_t k,
                                     std::uint64_t r_seed,
                                     OrthogonalCache& cache =
                                         default_orthogonal_cache()) {
  if (u.rows() != u.cols()) {
    throw ShapeError("build_rotation: basis must be square, got " +
                     shape_of(u));
  }
  const std::size_t m = u.rows();
  if (k < 1) throw ConfigError("build_rotation: rank_k must be >= 1");
  if (k > m) {
    throw ConfigError("build_rotation: rank_k " + std::to_string(k) +
                      " exceeds dimension " + std::to_string(m));
  }
  RotationBundle b;
  b.rank_k = k;
  b.r_seed = r_seed;
  b.residual_dim = m - k;
  if (k == m) {
    b.v = u;
    return b;
  }
  b.residual_rotation = cache.get(m - k, r_seed);
  const Matrix low = matmul(column_slice(u, k, m), *b.residual_rotation);
  b.v = hstack(column_slice(u, 0, k), low);
  return b;
}

inline RotationBundle build_rotation(const PcaBasis& pca, std::uint64_t r_seed,
                                     OrthogonalCache& cache =
                                         default_orthogonal_cache()) {
  return build_rotation(pca.basis.vectors, pca.rank_k, r_seed, cache);
}

// GPTQ settings plus the Hessian of the rotated residual activations.
struct GptqCalibration {
  GptqConfig config;
  Hessian hessian;
};

struct FusedLayer {
  std::string layer_id;
  RotationBundle rotation;
  Matrix w_high;   // k×n = U_hᵀW, never quantized
  Matrix w_low_ref;  // (m−k)×n = (U_l·R)ᵀW before quantization
  Matrix w_low_hat;  // dequantized residual slab (w_low_ref when unquantized)
  std::optional<QuantizedTensor> w_low_q;
  std::optional<QuantSpec> act_spec;
  std::optional<QuantSpec> weight_spec;
  std::optional<GptqConfig> gptq;

  // Column blocks of rotation.v used by forward().
  Matrix high_basis;
  Matrix low_basis;

  std::size_t in_features() const { return rotation.dim(); }
  std::size_t out_features() const { return w_high.cols(); }
};

// Fills the derived bases; used after deserialization too.
inline void attach_bases(FusedLayer& layer) {
  layer.high_basis = layer.rotation.high_basis();
  layer.low_basis = layer.rotation.low_basis();
}

// weight_spec = nullopt keeps the residual slab unquantized. When gptq is
// given its config.spec must equal weight_spec.
inline FusedLayer fuse_weights(const RotationBundle& rot, const Matrix& w,
                               const std::optional<QuantSpec>& weight_spec,
                               const std::optional<QuantSpec>& act_spec,
                               const std::optional<GptqCalibration>& gptq = {},
                               std::string layer_id = {}) {
  if (w.rows() != rot.dim()) {
    throw ShapeError("fuse_weights: weight " + shape_of(w) +
                     " does not match rotation dimension " +
                     std::to_string(rot.dim()));
  }
  if (act_spec) act_spec->validate();
  FusedLayer layer;
  layer.layer_id = std::move(layer_id);
  layer.rotation = rot;
  attach_bases(layer);
  layer.act_spec = act_spec;
  layer.weight_spec = weight_spec;
  layer.w_high = matmul(transpose(layer.high_basis), w);
  layer.w_low_ref = matmul(transpose(layer.low_basis), w);

  if (!weight_spec) {
    if (gptq) throw ConfigError("fuse_weights: gptq requires a weight spec");
    layer.w_low_hat = layer.w_low_ref;
    return layer;
  }
  if (layer.w_low_ref.rows() == 0) {
    layer.w_low_hat = layer.w_low_ref;
    return layer;
  }
  if (gptq) {
    if (!(gptq->config.spec == *weight_spec)) {
      throw ConfigError("fuse_weights: gptq spec differs from weight spec");
    }
    auto res = gptq_quantize(layer.w_low_ref, gptq->hessian, gptq->config);
    layer.w_low_q = std::move(res.q);
    layer.w_low_hat = std::move(res.w_hat);
    layer.gptq = gptq->config;
  } else {
    auto res = quantize_dequantize(layer.w_low_ref, *weight_spec,
                                   GroupAxis::along_columns);
    layer.w_low_q = std::move(res.q);
    layer.w_low_hat = std::move(res.x_hat);
  }
  return layer;
}

struct ForwardOptions {
  bool emulate_fp16 = false;  // round the high branch through binary16
};

struct ForwardDiagnostics {
  double high_qsnr_db = kQsnrCapDb;  // x·U_h vs what the high branch used
  double low_qsnr_db = kQsnrCapDb;   // x·U_l·R vs its quantized version
  double input_qsnr_db = kQsnrCapDb;  // whole rotated input
  std::optional<double> low_max_median_ratio;  // of x·U_l·R
};

struct ForwardResult {
  Matrix y;
  ForwardDiagnostics diag;
};

inline ForwardResult forward(const FusedLayer& layer, const Matrix& x,
                             const ForwardOptions& opts = {}) {
  if (x.cols() != layer.in_features()) {
    throw ShapeError("forward: input " + shape_of(x) + " but layer '" +
                     layer.layer_id + "' expects " +
                     std::to_string(layer.in_features()) + " channels");
  }
  ForwardResult out;
  Matrix x_high = matmul(x, layer.high_basis);
  Matrix high_used = opts.emulate_fp16 ? round_to_fp16(x_high) : x_high;
  const Matrix& w_high_used =
      opts.emulate_fp16 ? round_to_fp16(layer.w_high) : layer.w_high;
  out.y = matmul(high_used, w_high_used);
  const double high_signal = frobenius_sq(x_high);
  const double high_err = quant_error(x_high, high_used);
  out.diag.high_qsnr_db = capped_db(high_signal, high_err);

  double low_signal = 0.0;
  double low_err = 0.0;
  if (layer.low_basis.cols() > 0) {
    Matrix x_low = matmul(x, layer.low_basis);
    Matrix x_low_q =
        layer.act_spec ? quantize_dequantize(x_low, *layer.act_spec).x_hat
                       : x_low;
    low_signal = frobenius_sq(x_low);
    low_err = quant_error(x_low, x_low_q);
    out.diag.low_qsnr_db = capped_db(low_signal, low_err);
    if (low_signal > 0.0) {
      try {
        out.diag.low_max_median_ratio = max_median_ratio(x_low);
      } catch (const ConfigError&) {
        // Median channel is all zero: ratio undefined.
      }
    }
    out.y = out.y + matmul(x_low_q, layer.w_low_hat);
  }
  out.diag.input_qsnr_db =
      capped_db(high_signal + low_signal, high_err + low_err);
  return out;
}

// Plain round-to-nearest W·A baseline with no rotation.
struct RtnLayer {
  Matrix w_hat;
  std::optional<QuantizedTensor> w_q;
  std::optional<QuantSpec> act_spec;
};

inline RtnLayer make_rtn_layer(const Matrix& w,
                               const std::optional<QuantSpec>& weight_spec,
                               const std::optional<QuantSpec>& act_spec) {
  RtnLayer layer;
  layer.act_spec = act_spec;
  if (weight_spec) {
    auto res = quantize_dequantize(w, *weight_spec, GroupAxis::along_columns);
    layer.w_q = std::move(res.q);
    layer.w_hat = std::move(res.x_hat);
  } else {
    layer.w_hat = w;
  }
  return layer;
}

struct RtnForwardResult {
  Matrix y;
  Matrix x_hat;
};

inline RtnForwardResult forward_rtn(const RtnLayer& layer, const Matrix& x) {
  if (x.cols() != layer.w_hat.rows()) {
    throw ShapeError("forward_rtn: input " + shape_of(x) +
                     " incompatible with weight " + shape_of(layer.w_hat));
  }
  Matrix x_hat =
      layer.act_spec ? quantize_dequantize(x, *layer.act_spec).x_hat : x;
  Matrix y = matmul(x_hat, layer.w_hat);
  return {std::move(y), std::move(x_hat)};
}

}  // namespace dirotq

#endif  // DIROTQ_ROTATION_HPP_
