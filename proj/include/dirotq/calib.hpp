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

#ifndef DIROTQ_CALIB_HPP_
#define DIROTQ_CALIB_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "dirotq/error.hpp"
#include "dirotq/linalg.hpp"

namespace dirotq {

/// Running sum of XᵀX over every batch and timestep seen for one layer.
///
/// Value type: accumulate() returns a new accumulator and leaves the
/// receiver untouched; add() is the in-place form. Two accumulators over
/// disjoint data merge into the accumulator of the concatenated data.
class SecondMomentAccumulator {
 public:
  SecondMomentAccumulator() = default;
  explicit SecondMomentAccumulator(std::size_t dim) : sum_xtx_(dim, dim) {}

  static SecondMomentAccumulator from_state(Matrix sum_xtx,
                                            std::size_t token_count) {
    if (sum_xtx.rows() != sum_xtx.cols()) {
      throw ShapeError("accumulator state must be square, got " +
                       shape_of(sum_xtx));
    }
    SecondMomentAccumulator acc;
    acc.sum_xtx_ = std::move(sum_xtx);
    acc.token_count_ = token_count;
    return acc;
  }

  std::size_t dim() const { return sum_xtx_.rows(); }
  std::size_t token_count() const { return token_count_; }
  const Matrix& sum_xtx() const { return sum_xtx_; }

  void add(const Matrix& x) {
    if (x.cols() != dim()) {
      throw ShapeError("accumulate: batch has " + std::to_string(x.cols()) +
                       " channels, accumulator expects " +
                       std::to_string(dim()));
    }
    const std::size_t n = dim();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double* row = x.row(r).data();
      for (std::size_t i = 0; i < n; ++i) {
        const double xi = row[i];
        if (xi == 0.0) continue;
        double* si = sum_xtx_.row(i).data();
        for (std::size_t j = i; j < n; ++j) si[j] += xi * row[j];
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) sum_xtx_(i, j) = sum_xtx_(j, i);
    token_count_ += x.rows();
  }

  SecondMomentAccumulator accumulate(const Matrix& x) const {
    SecondMomentAccumulator next = *this;
    next.add(x);
    return next;
  }

  SecondMomentAccumulator merged(const SecondMomentAccumulator& other) const {
    if (other.dim() != dim()) {
      throw ShapeError("merge: accumulator dims differ (" +
                       std::to_string(dim()) + " vs " +
                       std::to_string(other.dim()) + ")");
    }
    return from_state(sum_xtx_ + other.sum_xtx_,
                      token_count_ + other.token_count_);
  }

  /// Σ = XᵀX / N (uncentered).
  Matrix second_moment() const {
    if (token_count_ == 0) {
      throw ConfigError("second moment of an empty accumulator");
    }
    return (1.0 / static_cast<double>(token_count_)) * sum_xtx_;
  }

 private:
  Matrix sum_xtx_;
  std::size_t token_count_ = 0;
};

/// PCA basis of one layer's activations. basis.values are the eigenvalues of
/// the damped second moment, so the raw variance along column j of
/// X·basis.vectors is values[j] − damping_offset.
struct PcaBasis {
  EigenDecomposition basis;
  std::size_t rank_k = 1;
  double rank_ratio = 0.1;
  double damping_lambda = 0.01;
  double damping_offset = 0.0;  // damping_lambda · mean(diag Σ)
  std::size_t token_count = 0;
  std::string layer_id;

  std::size_t dim() const { return basis.values.size(); }
  Matrix high_basis() const { return column_slice(basis.vectors, 0, rank_k); }
  Matrix low_basis() const {
    return column_slice(basis.vectors, rank_k, dim());
  }
};

/// k = round(r·m) clamped to [1, m].
inline std::size_t rank_for_ratio(double r, std::size_t m) {
  if (!(r > 0.0 && r <= 1.0)) {
    throw ConfigError("rank ratio must lie in (0, 1], got " +
                      std::to_string(r));
  }
  const long k = std::lround(r * static_cast<double>(m));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 1L)), 1,
                                 std::max<std::size_t>(m, 1));
}

inline PcaBasis finalize_pca(const SecondMomentAccumulator& acc, double r,
                             double damping, std::string layer_id,
                             const EighOptions& eigh = {}) {
  if (acc.token_count() == 0) {
    throw ConfigError("finalize_pca: accumulator for layer '" + layer_id +
                      "' holds no tokens");
  }
  if (!(damping >= 0.0)) {
    throw ConfigError("finalize_pca: damping must be non-negative");
  }
  const std::size_t m = acc.dim();
  const std::size_t k = rank_for_ratio(r, m);
  Matrix sigma = acc.second_moment();
  double mean_diag = 0.0;
  for (std::size_t i = 0; i < m; ++i) mean_diag += sigma(i, i);
  mean_diag /= static_cast<double>(m);
  const double offset = damping * mean_diag;
  for (std::size_t i = 0; i < m; ++i) sigma(i, i) += offset;

  PcaBasis pca;
  pca.basis = eigh_descending(sigma, eigh);
  pca.rank_k = k;
  pca.rank_ratio = r;
  pca.damping_lambda = damping;
  pca.damping_offset = offset;
  pca.token_count = acc.token_count();
  pca.layer_id = std::move(layer_id);
  return pca;
}

}  // namespace dirotq

#endif  // DIROTQ_CALIB_HPP_
