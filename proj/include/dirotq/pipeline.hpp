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

// End-to-end calibrate → rotate → quantize → evaluate for one layer, the
// synthetic layer suite, and the rank-ratio sweep.

#ifndef DIROTQ_PIPELINE_HPP_
#define DIROTQ_PIPELINE_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dirotq/calib.hpp"
#include "dirotq/error.hpp"
#include "dirotq/gptq.hpp"
#include "dirotq/linalg.hpp"
#include "dirotq/metrics.hpp"
#include "dirotq/quant.hpp"
#include "dirotq/rotation.hpp"
#include "dirotq/synth.hpp"

namespace dirotq {

inline QuantSpec default_act_spec() {
  return QuantSpec::integer(4, QuantMode::asymmetric, Granularity::per_group,
                            64);
}

inline QuantSpec default_weight_spec() {
  return QuantSpec::integer(4, QuantMode::symmetric, Granularity::per_group,
                            64);
}

struct PipelineConfig {
  double r = 0.10;
  std::optional<QuantSpec> act_spec = default_act_spec();
  std::optional<QuantSpec> weight_spec = default_weight_spec();
  bool gptq_enabled = true;
  GptqConfig gptq;  // gptq.spec is overwritten by weight_spec when run
  double pca_damping = 0.01;
  std::uint64_t r_seed = 0;
  EighOptions eigh;

  void validate() const {
    if (!(r > 0.0 && r <= 1.0)) {
      throw ConfigError("r must lie in (0, 1], got " + std::to_string(r));
    }
    if (act_spec) act_spec->validate();
    if (weight_spec) weight_spec->validate();
    if (gptq_enabled && weight_spec) {
      GptqConfig g = gptq;
      g.spec = *weight_spec;
      g.validate();
    }
    if (!(pca_damping >= 0.0)) {
      throw ConfigError("pca_damping must be non-negative");
    }
  }
};

// Hessian of the rotated residual activations, straight from Σ XᵀX.
inline Hessian residual_hessian(const SecondMomentAccumulator& acc,
                                const RotationBundle& rot) {
  return hessian_in_basis(acc.sum_xtx(), acc.token_count(), rot.low_basis());
}

inline FusedLayer quantize_layer(const PcaBasis& pca, const Matrix& w,
                                 const SecondMomentAccumulator& acc,
                                 const PipelineConfig& cfg,
                                 OrthogonalCache& cache =
                                     default_orthogonal_cache()) {
  const RotationBundle rot = build_rotation(pca, cfg.r_seed, cache);
  std::optional<GptqCalibration> gptq;
  if (cfg.gptq_enabled && cfg.weight_spec && rot.residual_dim > 0) {
    GptqConfig g = cfg.gptq;
    g.spec = *cfg.weight_spec;
    gptq = GptqCalibration{g, residual_hessian(acc, rot)};
  }
  return fuse_weights(rot, w, cfg.weight_spec, cfg.act_spec, gptq,
                      pca.layer_id);
}

inline FusedLayer calibrate_and_quantize(const SecondMomentAccumulator& acc,
                                         const Matrix& w,
                                         const PipelineConfig& cfg,
                                         const std::string& layer_id,
                                         OrthogonalCache& cache =
                                             default_orthogonal_cache()) {
  cfg.validate();
  const PcaBasis pca =
      finalize_pca(acc, cfg.r, cfg.pca_damping, layer_id, cfg.eigh);
  return quantize_layer(pca, w, acc, cfg, cache);
}

struct LayerEval {
  double dirotq_output_db = 0.0;
  double rtn_output_db = 0.0;
  double dirotq_input_db = 0.0;
  double rtn_input_db = 0.0;
  BranchBreakdown dirotq_branches;
  std::optional<double> low_max_median_ratio;
};

// Output-side QSNR compares against the unquantized x·w; input-side compares
// the activations each method feeds its matmul (rotated space for DiRotQ,
// which is norm-preserving).
inline LayerEval evaluate_layer(const FusedLayer& layer, const RtnLayer& rtn,
                                const Matrix& w, const Matrix& x,
                                const ForwardOptions& opts = {}) {
  const Matrix y_ref = matmul(x, w);
  const ForwardResult d = forward(layer, x, opts);
  const RtnForwardResult b = forward_rtn(rtn, x);
  LayerEval e;
  e.dirotq_output_db = qsnr_db(y_ref, d.y);
  e.rtn_output_db = qsnr_db(y_ref, b.y);
  e.dirotq_input_db = d.diag.input_qsnr_db;
  e.rtn_input_db = qsnr_db(x, b.x_hat);
  e.dirotq_branches = {d.diag.high_qsnr_db, d.diag.low_qsnr_db};
  e.low_max_median_ratio = d.diag.low_max_median_ratio;
  return e;
}

// --- Synthetic suite ------------------------------------------------------

struct SyntheticLayer {
  std::string layer_id;
  SynthConfig synth;
  std::size_t out_features = 0;
  std::uint64_t weight_seed = 0;
};

struct SuiteConfig {
  std::size_t calib_samples = 128;
  std::vector<std::size_t> eval_timesteps = {0, 5, 10, 15, 19};
  std::vector<SyntheticLayer> layers;
};

// Per-layer generator used by the default suite: m = 256, sixteen drifting
// ×50 outlier channels over log-normal channel scales.
inline SynthConfig default_suite_synth() {
  SynthConfig c;
  c.channels = 256;
  c.tokens_per_step = 16;
  c.timesteps = 20;
  c.outlier_channels = 16;
  c.outlier_scale = 50.0;
  c.drift_amplitude = 0.5;
  c.channel_scale_spread = 0.5;
  return c;
}

// Layer i draws its profile from derive_seed(tmpl.seed, "layer", i) and its
// Gaussian weights (m × out_features, std 1/√m) from a sibling seed.
inline SuiteConfig make_suite(const SynthConfig& tmpl, std::size_t layer_count,
                              std::size_t out_features,
                              std::size_t calib_samples,
                              std::vector<std::size_t> eval_timesteps) {
  tmpl.validate();
  if (layer_count == 0) throw ConfigError("suite needs at least one layer");
  if (out_features == 0) throw ConfigError("out_features must be >= 1");
  if (calib_samples == 0) throw ConfigError("calib_samples must be >= 1");
  for (std::size_t t : eval_timesteps) {
    if (t >= tmpl.timesteps) {
      throw ConfigError("eval timestep " + std::to_string(t) +
                        " out of range [0, " + std::to_string(tmpl.timesteps) +
                        ")");
    }
  }
  SuiteConfig s;
  s.calib_samples = calib_samples;
  s.eval_timesteps = std::move(eval_timesteps);
  for (std::size_t i = 0; i < layer_count; ++i) {
    SynthConfig c = tmpl;
    c.seed = derive_seed(tmpl.seed, 0x6c61796572ULL, i);
    s.layers.push_back({"layer" + std::to_string(i), c, out_features,
                        derive_seed(tmpl.seed, 0x77656967ULL, i)});
  }
  return s;
}

inline SuiteConfig default_suite(std::uint64_t seed = 0) {
  SynthConfig tmpl = default_suite_synth();
  tmpl.seed = seed;
  return make_suite(tmpl, 2, 256, 128, {0, 5, 10, 15, 19});
}

inline Matrix synthetic_weight(const SyntheticLayer& layer) {
  const double m = static_cast<double>(layer.synth.channels);
  return gaussian_matrix(layer.synth.channels, layer.out_features,
                         layer.weight_seed, 1.0 / std::sqrt(m));
}

// calib_samples × timesteps calibration batches from the calibration stream.
inline SecondMomentAccumulator synthetic_accumulator(const SynthConfig& synth,
                                                     std::size_t calib_samples) {
  if (calib_samples == 0) throw ConfigError("calib_samples must be >= 1");
  SecondMomentAccumulator acc(synth.channels);
  for (std::size_t s = 0; s < calib_samples; ++s)
    for (std::size_t t = 0; t < synth.timesteps; ++t)
      acc.add(generate_stream(synth, SynthStream::calibration, s, t));
  return acc;
}

inline Matrix synthetic_eval_batch(const SynthConfig& synth, std::size_t t) {
  return generate_stream(synth, SynthStream::evaluation, 0, t);
}

// --- Rank-ratio sweep -----------------------------------------------------

struct SweepLayer {
  std::string layer_id;
  SecondMomentAccumulator acc;
  Matrix w;
  std::vector<Matrix> eval_inputs;
};

struct SweepRow {
  double r = 0.0;
  std::size_t rank_k = 0;
  double qsnr_db = 0.0;  // mean output-side QSNR over layers and inputs
};

// One row per r; the accumulators are reused, only PCA onwards reruns.
inline std::vector<SweepRow> r_sweep(const std::vector<SweepLayer>& layers,
                                     const std::vector<double>& r_values,
                                     const PipelineConfig& base,
                                     OrthogonalCache& cache =
                                         default_orthogonal_cache()) {
  if (r_values.empty()) throw ConfigError("r_sweep: no r values");
  if (layers.empty()) throw ConfigError("r_sweep: no layers");
  for (std::size_t i = 0; i < r_values.size(); ++i) {
    const double r = r_values[i];
    if (!(r > 0.0 && r < 1.0)) {
      throw ConfigError("r_sweep: r must lie in (0, 1), got " +
                        std::to_string(r));
    }
    if (i > 0 && !(r > r_values[i - 1])) {
      throw ConfigError("r_sweep: r values must be strictly ascending");
    }
  }
  std::vector<SweepRow> rows;
  for (double r : r_values) {
    PipelineConfig cfg = base;
    cfg.r = r;
    double sum = 0.0;
    std::size_t count = 0;
    std::size_t k = 0;
    for (const SweepLayer& l : layers) {
      const FusedLayer fused =
          calibrate_and_quantize(l.acc, l.w, cfg, l.layer_id, cache);
      k = fused.rotation.rank_k;
      for (const Matrix& x : l.eval_inputs) {
        sum += qsnr_db(matmul(x, l.w), forward(fused, x).y);
        ++count;
      }
    }
    rows.push_back({r, k, sum / static_cast<double>(count)});
  }
  return rows;
}

}  // namespace dirotq

#endif  // DIROTQ_PIPELINE_HPP_
