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

// GPTQ for weights stored input-major (w is in_features × out_features, so
// a GPTQ "column" is a row of w here). Rows are visited in natural order.

#ifndef DIROTQ_GPTQ_HPP_
#define DIROTQ_GPTQ_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dirotq/error.hpp"
#include "dirotq/linalg.hpp"
#include "dirotq/quant.hpp"

namespace dirotq {

struct GptqConfig {
  double damping_lambda = 0.01;
  std::size_t block_size = 128;
  QuantSpec spec =
      QuantSpec::integer(4, QuantMode::symmetric, Granularity::per_group, 64);

  void validate() const {
    if (!(damping_lambda > 0.0)) {
      throw ConfigError("gptq damping_lambda must be > 0");
    }
    if (block_size == 0) throw ConfigError("gptq block_size must be >= 1");
    spec.validate();
  }

  friend bool operator==(const GptqConfig&, const GptqConfig&) = default;
};

struct Hessian {
  Matrix h;
  std::size_t sample_count = 0;
};

// H = Σ XᵀX over the batches.
inline Hessian build_hessian(std::span<const Matrix> batches) {
  if (batches.empty()) throw ConfigError("build_hessian: no batches");
  const std::size_t d = batches.front().cols();
  Hessian out{Matrix(d, d), 0};
  for (const Matrix& b : batches) {
    if (b.cols() != d) {
      throw ShapeError("build_hessian: batch with " + std::to_string(b.cols()) +
                       " columns, expected " + std::to_string(d));
    }
    out.h = out.h + gram(b);
    out.sample_count += b.rows();
  }
  return out;
}

// Hessian of rotated activations X·basis from the raw Σ XᵀX:
// basisᵀ (Σ XᵀX) basis. Exactly symmetric.
inline Hessian hessian_in_basis(const Matrix& sum_xtx, std::size_t samples,
                                const Matrix& basis) {
  Matrix h = matmul(transpose(basis), matmul(sum_xtx, basis));
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = i + 1; j < h.cols(); ++j) {
      const double s = 0.5 * (h(i, j) + h(j, i));
      h(i, j) = s;
      h(j, i) = s;
    }
  }
  return {std::move(h), samples};
}

// H + λ·mean(diag H)·I; all-zero diagonal entries become 1.
inline Matrix damped_hessian(const Matrix& h, double lambda) {
  const std::size_t n = h.rows();
  double mean_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_diag += h(i, i);
  mean_diag = n == 0 ? 0.0 : mean_diag / static_cast<double>(n);
  Matrix out = h;
  for (std::size_t i = 0; i < n; ++i) {
    if (h(i, i) == 0.0) {
      out(i, i) = 1.0;
    } else {
      out(i, i) += lambda * mean_diag;
    }
  }
  return out;
}

// trace(ΔᵀHΔ) with Δ = w − w_hat.
inline double weighted_error(const Matrix& w, const Matrix& w_hat,
                             const Matrix& h) {
  const Matrix delta = w - w_hat;
  const Matrix hd = matmul(h, delta);
  double s = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i)
    s += delta.data()[i] * hd.data()[i];
  return s;
}

struct GptqResult {
  QuantizedTensor q;
  Matrix w_hat;
};

// Quantization groups run down each output column (GroupAxis::along_columns)
// and their parameters are fitted once from the incoming weights.
inline GptqResult gptq_quantize(const Matrix& w, const Hessian& hess,
                                const GptqConfig& cfg) {
  cfg.validate();
  if (hess.h.rows() != w.rows() || hess.h.cols() != w.rows()) {
    throw ShapeError("gptq: weight " + shape_of(w) +
                     " incompatible with hessian " + shape_of(hess.h));
  }
  check_finite(w, "gptq");
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const QuantSpec& spec = cfg.spec;
  const QuantParams params = fit_params(w, spec, GroupAxis::along_columns);
  const GroupLayout layout = make_layout(m, n, spec, GroupAxis::along_columns);
  const bool asym = !params.zero_points.empty();

  // Upper Cholesky factor of H'^{-1}.
  const Matrix hinv = spd_inverse(damped_hessian(hess.h, cfg.damping_lambda));
  const Matrix u = transpose(cholesky_lower(hinv));

  Matrix work = w;
  QuantizedTensor q;
  q.layout = layout;
  q.spec = spec;
  q.scales = params.scales;
  q.zero_points = params.zero_points;
  q.tensor_scale = params.tensor_scale;
  q.codes.assign(m * n, 0);
  Matrix w_hat(m, n);

  std::vector<double> err(n);
  for (std::size_t i1 = 0; i1 < m; i1 += cfg.block_size) {
    const std::size_t i2 = std::min(i1 + cfg.block_size, m);
    Matrix block_err(i2 - i1, n);
    for (std::size_t i = i1; i < i2; ++i) {
      const double d = u(i, i);
      for (std::size_t c = 0; c < n; ++c) {
        const std::size_t g = layout.group_of(i, c);
        const double z = asym ? params.zero_points[g] : 0.0;
        const std::int32_t code =
            encode_value(work(i, c), params.scales[g], z, spec);
        const double v = decode_value(code, params.scales[g], z, spec);
        q.codes[i * n + c] = code;
        w_hat(i, c) = v;
        err[c] = (work(i, c) - v) / d;
      }
      for (std::size_t j = i + 1; j < i2; ++j) {
        const double f = u(i, j);
        if (f == 0.0) continue;
        double* wj = work.row(j).data();
        for (std::size_t c = 0; c < n; ++c) wj[c] -= f * err[c];
      }
      std::copy(err.begin(), err.end(), block_err.row(i - i1).begin());
    }
    for (std::size_t j = i2; j < m; ++j) {
      double* wj = work.row(j).data();
      for (std::size_t i = i1; i < i2; ++i) {
        const double f = u(i, j);
        if (f == 0.0) continue;
        const double* e = block_err.row(i - i1).data();
        for (std::size_t c = 0; c < n; ++c) wj[c] -= f * e[c];
      }
    }
  }
  return {std::move(q), std::move(w_hat)};
}

}  // namespace dirotq

#endif  // DIROTQ_GPTQ_HPP_
