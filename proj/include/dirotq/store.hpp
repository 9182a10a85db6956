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

// On-disk layout of per-layer artifacts. Each artifact is a directory of
// tensor files plus a JSON manifest.
//
//   accumulator:  sum_xtx.drtq, accumulator.json {dim, token_count, layer_id}
//   PCA basis:    basis.drtq (columns are eigenvectors), eigenvalues.drtq,
//                 manifest.json
//   fused layer:  v.drtq, w_high.drtq, w_low_ref.drtq, and when quantized
//                 w_low_codes.drtq (binary32), w_low_scales.drtq,
//                 w_low_zero_points.drtq; manifest.json {layer_id, m, n, k,
//                 r_seed, act_spec, weight_spec, gptq, tensor_scale}

#ifndef DIROTQ_STORE_HPP_
#define DIROTQ_STORE_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dirotq/calib.hpp"
#include "dirotq/error.hpp"
#include "dirotq/json_io.hpp"
#include "dirotq/quant.hpp"
#include "dirotq/rotation.hpp"
#include "dirotq/tensor_io.hpp"

namespace dirotq {

namespace fs = std::filesystem;

inline void write_json(const fs::path& path, const Json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw FormatError("write failed for " + path.string());
}

inline Json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path.string());
  try {
    return Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed JSON: " + e.what());
  }
}

namespace detail {

template <typename T>
T manifest_get(const Json& j, const char* key, const fs::path& where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw FormatError(where.string() + ": missing '" + key + "'");
  }
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where.string() + ": bad '" + key + "': " + e.what());
  }
}

}  // namespace detail

// --- Accumulator ---------------------------------------------------------

inline void save_accumulator(const fs::path& dir,
                             const SecondMomentAccumulator& acc,
                             const std::string& layer_id) {
  fs::create_directories(dir);
  write_matrix(dir / "sum_xtx.drtq", acc.sum_xtx());
  write_json(dir / "accumulator.json", Json{{"dim", acc.dim()},
                                            {"token_count", acc.token_count()},
                                            {"layer_id", layer_id}});
}

inline SecondMomentAccumulator load_accumulator(const fs::path& dir) {
  const fs::path meta_path = dir / "accumulator.json";
  const Json meta = read_json(meta_path);
  const auto dim = detail::manifest_get<std::size_t>(meta, "dim", meta_path);
  Matrix sum = read_matrix(dir / "sum_xtx.drtq");
  if (sum.rows() != dim || sum.cols() != dim) {
    throw FormatError(dir.string() + ": sum_xtx is " + shape_of(sum) +
                      " but sidecar says dim " + std::to_string(dim));
  }
  return SecondMomentAccumulator::from_state(
      std::move(sum),
      detail::manifest_get<std::size_t>(meta, "token_count", meta_path));
}

// --- PCA basis -----------------------------------------------------------

inline void save_pca(const fs::path& dir, const PcaBasis& pca) {
  fs::create_directories(dir);
  write_matrix(dir / "basis.drtq", pca.basis.vectors);
  write_tensor(dir / "eigenvalues.drtq", to_tensor(pca.basis.values));
  write_json(dir / "manifest.json",
             Json{{"layer_id", pca.layer_id},
                  {"m", pca.dim()},
                  {"k", pca.rank_k},
                  {"r", pca.rank_ratio},
                  {"damping_lambda", pca.damping_lambda},
                  {"damping_offset", pca.damping_offset},
                  {"token_count", pca.token_count}});
}

inline PcaBasis load_pca(const fs::path& dir) {
  const fs::path mp = dir / "manifest.json";
  const Json j = read_json(mp);
  PcaBasis pca;
  pca.layer_id = detail::manifest_get<std::string>(j, "layer_id", mp);
  pca.rank_k = detail::manifest_get<std::size_t>(j, "k", mp);
  pca.rank_ratio = detail::manifest_get<double>(j, "r", mp);
  pca.damping_lambda = detail::manifest_get<double>(j, "damping_lambda", mp);
  pca.damping_offset = detail::manifest_get<double>(j, "damping_offset", mp);
  pca.token_count = detail::manifest_get<std::size_t>(j, "token_count", mp);
  pca.basis.vectors = read_matrix(dir / "basis.drtq");
  pca.basis.values = to_vector(read_tensor(dir / "eigenvalues.drtq"));
  const auto m = detail::manifest_get<std::size_t>(j, "m", mp);
  if (pca.basis.vectors.rows() != m || pca.basis.vectors.cols() != m ||
      pca.basis.values.size() != m || pca.rank_k < 1 || pca.rank_k > m) {
    throw FormatError(dir.string() + ": basis tensors disagree with manifest");
  }
  return pca;
}

// --- Fused layer ---------------------------------------------------------

inline void save_fused_layer(const fs::path& dir, const FusedLayer& layer) {
  fs::create_directories(dir);
  write_matrix(dir / "v.drtq", layer.rotation.v);
  write_matrix(dir / "w_high.drtq", layer.w_high);
  write_matrix(dir / "w_low_ref.drtq", layer.w_low_ref);
  double tensor_scale = 1.0;
  if (layer.w_low_q) {
    const QuantizedTensor& q = *layer.w_low_q;
    Tensor codes;
    codes.dtype = DType::f32;
    codes.shape = {q.layout.rows, q.layout.cols};
    codes.values.assign(q.codes.begin(), q.codes.end());
    write_tensor(dir / "w_low_codes.drtq", codes);
    write_tensor(dir / "w_low_scales.drtq", to_tensor(q.scales));
    if (!q.zero_points.empty()) {
      write_tensor(dir / "w_low_zero_points.drtq", to_tensor(q.zero_points));
    }
    tensor_scale = q.tensor_scale;
  }
  write_json(dir / "manifest.json",
             Json{{"layer_id", layer.layer_id},
                  {"m", layer.in_features()},
                  {"n", layer.out_features()},
                  {"k", layer.rotation.rank_k},
                  {"r_seed", layer.rotation.r_seed},
                  {"act_spec", to_json(layer.act_spec)},
                  {"weight_spec", to_json(layer.weight_spec)},
                  {"gptq", layer.gptq ? to_json(*layer.gptq) : Json(nullptr)},
                  {"quantized", layer.w_low_q.has_value()},
                  {"tensor_scale", tensor_scale}});
}

inline FusedLayer load_fused_layer(const fs::path& dir) {
  const fs::path mp = dir / "manifest.json";
  const Json j = read_json(mp);
  FusedLayer layer;
  layer.layer_id = detail::manifest_get<std::string>(j, "layer_id", mp);
  const auto m = detail::manifest_get<std::size_t>(j, "m", mp);
  const auto n = detail::manifest_get<std::size_t>(j, "n", mp);
  const auto k = detail::manifest_get<std::size_t>(j, "k", mp);
  try {
    layer.act_spec = quant_spec_from_json(j.at("act_spec"));
    layer.weight_spec = quant_spec_from_json(j.at("weight_spec"));
    if (!j.at("gptq").is_null()) {
      layer.gptq = gptq_config_from_json(j.at("gptq"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(mp.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(mp.string() + ": " + e.what());
  }
  layer.rotation.v = read_matrix(dir / "v.drtq");
  layer.rotation.rank_k = k;
  layer.rotation.r_seed = detail::manifest_get<std::uint64_t>(j, "r_seed", mp);
  layer.rotation.residual_dim = m - std::min(k, m);
  layer.w_high = read_matrix(dir / "w_high.drtq");
  layer.w_low_ref = read_matrix(dir / "w_low_ref.drtq");
  if (layer.rotation.v.rows() != m || layer.rotation.v.cols() != m || k < 1 ||
      k > m || layer.w_high.rows() != k || layer.w_high.cols() != n ||
      layer.w_low_ref.rows() != m - k || layer.w_low_ref.cols() != n) {
    throw FormatError(dir.string() + ": tensors disagree with manifest");
  }
  attach_bases(layer);
  if (detail::manifest_get<bool>(j, "quantized", mp)) {
    if (!layer.weight_spec) {
      throw FormatError(mp.string() + ": quantized layer without weight_spec");
    }
    QuantizedTensor q;
    q.spec = *layer.weight_spec;
    q.layout = make_layout(m - k, n, q.spec, GroupAxis::along_columns);
    const Tensor codes = read_tensor(dir / "w_low_codes.drtq");
    if (codes.shape != std::vector<std::uint64_t>{m - k, n}) {
      throw FormatError(dir.string() + ": code tensor has the wrong shape");
    }
    q.codes.reserve(codes.values.size());
    for (double c : codes.values) q.codes.push_back(static_cast<std::int32_t>(c));
    q.scales = to_vector(read_tensor(dir / "w_low_scales.drtq"));
    if (fs::exists(dir / "w_low_zero_points.drtq")) {
      q.zero_points = to_vector(read_tensor(dir / "w_low_zero_points.drtq"));
    }
    q.tensor_scale = detail::manifest_get<double>(j, "tensor_scale", mp);
    if (q.scales.size() != q.layout.group_count()) {
      throw FormatError(dir.string() + ": scale count disagrees with layout");
    }
    layer.w_low_hat = dequantize(q);
    layer.w_low_q = std::move(q);
  } else {
    layer.w_low_hat = layer.w_low_ref;
  }
  return layer;
}

}  // namespace dirotq

#endif  // DIROTQ_STORE_HPP_
