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

#include "dirotq/gptq.hpp"

#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace dirotq {
namespace {

GptqConfig per_channel_int4() {
  GptqConfig c;
  c.spec = QuantSpec::integer(4, QuantMode::symmetric, Granularity::per_channel);
  return c;
}

Matrix rtn(const Matrix& w, const QuantSpec& spec) {
  return quantize_dequantize(w, spec, GroupAxis::along_columns).x_hat;
}

TEST(BuildHessianTest, Examples) {
  const std::vector<Matrix> one = {Matrix::identity(2)};
  const Hessian h1 = build_hessian(one);
  EXPECT_EQ(h1.h, Matrix::identity(2));
  EXPECT_EQ(h1.sample_count, 2u);

  const Matrix x = gaussian_matrix(5, 3, 1);
  const std::vector<Matrix> twice = {x, x};
  EXPECT_EQ(build_hessian(twice).h, 2.0 * gram(x));
}

TEST(BuildHessianTest, MatchesSinglePassOracle) {
  std::vector<Matrix> batches;
  Matrix all;
  for (std::uint64_t s = 0; s < 4; ++s) {
    batches.push_back(gaussian_matrix(9, 6, derive_seed(3, s)));
    all = s == 0 ? batches.back() : vstack(all, batches.back());
  }
  const Hessian h = build_hessian(batches);
  EXPECT_EQ(h.sample_count, 36u);
  EXPECT_LT(relative_frobenius_error(
                oracle::triple_loop_matmul(transpose(all), all), h.h),
            1e-12);
}

TEST(BuildHessianTest, Rejections) {
  EXPECT_THROW(build_hessian(std::vector<Matrix>{}), ConfigError);
  const std::vector<Matrix> bad = {Matrix(2, 3), Matrix(2, 4)};
  EXPECT_THROW(build_hessian(bad), ShapeError);
}

TEST(BuildHessianTest, InBasisMatchesRotatedBatches) {
  const Matrix x = gaussian_matrix(40, 8, 4);
  const Matrix basis = column_slice(random_orthogonal(8, 2), 2, 8);
  const std::vector<Matrix> rotated = {matmul(x, basis)};
  const Hessian ref = build_hessian(rotated);
  const Hessian h = hessian_in_basis(gram(x), 40, basis);
  EXPECT_LT(relative_frobenius_error(ref.h, h.h), 1e-12);
  EXPECT_EQ(h.h, transpose(h.h));
}

TEST(DampingTest, MeanDiagonalAndDeadColumns) {
  const Matrix h = Matrix::from_rows({{4, 0, 0}, {0, 0, 0}, {0, 0, 2}});
  const Matrix d = damped_hessian(h, 0.5);
  EXPECT_EQ(d(0, 0), 5.0);
  EXPECT_EQ(d(1, 1), 1.0);
  EXPECT_EQ(d(2, 2), 3.0);
}

TEST(GptqTest, DiagonalHessianEqualsRtnBitwise) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix w = gaussian_matrix(150, 20, derive_seed(s, 1));
    Hessian h{Matrix(150, 150), 1};
    std::mt19937_64 rng(s);
    for (std::size_t i = 0; i < 150; ++i) h.h(i, i) = 0.1 + (rng() % 100) / 10.0;
    for (const GptqConfig& cfg : {GptqConfig{}, per_channel_int4()}) {
      const GptqResult r = gptq_quantize(w, h, cfg);
      const QuantResult ref = quantize_dequantize(w, cfg.spec, GroupAxis::along_columns);
      EXPECT_EQ(r.w_hat, ref.x_hat);
      EXPECT_EQ(r.q.codes, ref.q.codes);
    }
  }
}

TEST(GptqTest, OnGridWeightsAreFixedPoint) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> code(-7, 7);
  Matrix w(64, 6);
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t c = 0; c < 6; ++c) w(i, c) = 0.125 * code(rng);
  for (std::size_t c = 0; c < 6; ++c) w(0, c) = 0.125 * 7;
  const Matrix a = gaussian_matrix(100, 64, 9);
  const GptqResult r = gptq_quantize(w, {gram(a), 100}, GptqConfig{});
  EXPECT_EQ(r.w_hat, w);
  EXPECT_EQ(weighted_error(w, r.w_hat, damped_hessian(gram(a), 0.01)), 0.0);
}

TEST(GptqTest, BeatsRtnOnCorrelatedHessians) {
  int wins = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Matrix w = gaussian_matrix(8, 8, derive_seed(s, 11));
    // Correlated inputs: mix Gaussian columns.
    const Matrix a = matmul(gaussian_matrix(32, 8, derive_seed(s, 12)),
                            gaussian_matrix(8, 8, derive_seed(s, 13)));
    const Hessian h{gram(a), 32};
    const GptqConfig cfg = per_channel_int4();
    const Matrix hd = damped_hessian(h.h, cfg.damping_lambda);
    const double g = weighted_error(w, gptq_quantize(w, h, cfg).w_hat, hd);
    const double r = weighted_error(w, rtn(w, cfg.spec), hd);
    if (g <= r) ++wins;
  }
  EXPECT_GE(wins, 95);
}

// Minimum of trace(ΔᵀH'Δ) over every code pair of a 2-row column, with the
// per-column scale held fixed.
double exhaustive_objective(const Matrix& w, const Matrix& hd,
                            const std::vector<double>& scales) {
  double total = 0.0;
  for (std::size_t c = 0; c < w.cols(); ++c) {
    double best = std::numeric_limits<double>::infinity();
    for (int q0 = -7; q0 <= 7; ++q0) {
      for (int q1 = -7; q1 <= 7; ++q1) {
        const double d0 = w(0, c) - q0 * scales[c];
        const double d1 = w(1, c) - q1 * scales[c];
        best = std::min(best, d0 * d0 * hd(0, 0) + 2 * d0 * d1 * hd(0, 1) +
                                  d1 * d1 * hd(1, 1));
      }
    }
    total += best;
  }
  return total;
}

TEST(GptqTest, TwoByTwoMatchesExhaustiveSearch) {
  const GptqConfig cfg = per_channel_int4();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix w = gaussian_matrix(2, 2, derive_seed(7, s, 1));
    const Matrix a = gaussian_matrix(8, 2, derive_seed(7, s, 2));
    const Hessian h{gram(a), 8};
    const Matrix hd = damped_hessian(h.h, cfg.damping_lambda);
    const GptqResult r = gptq_quantize(w, h, cfg);
    const double brute = exhaustive_objective(w, hd, r.q.scales);
    EXPECT_NEAR(weighted_error(w, r.w_hat, hd), brute, 1e-9) << "seed " << s;
  }
}

TEST(GptqTest, BlockSizeOneAndLargeAgree) {
  const Matrix w = gaussian_matrix(40, 5, 3);
  const Hessian h{gram(gaussian_matrix(80, 40, 4)), 80};
  GptqConfig a, b;
  a.block_size = 1;
  b.block_size = 1000;
  EXPECT_LT(max_abs_diff(gptq_quantize(w, h, a).w_hat, gptq_quantize(w, h, b).w_hat),
            1e-12);
}

TEST(GptqTest, Deterministic) {
  const Matrix w = gaussian_matrix(130, 7, 3);
  const Hessian h{gram(gaussian_matrix(200, 130, 4)), 200};
  const GptqResult a = gptq_quantize(w, h, GptqConfig{});
  const GptqResult b = gptq_quantize(w, h, GptqConfig{});
  EXPECT_EQ(a.w_hat, b.w_hat);
  EXPECT_EQ(a.q.codes, b.q.codes);
  for (auto c : a.q.codes) {
    EXPECT_GE(c, -7);
    EXPECT_LE(c, 7);
  }
}

TEST(GptqTest, IndefiniteHessianReportsPivot) {
  const Hessian h{Matrix::from_rows({{1, 3}, {3, 1}}), 2};
  try {
    gptq_quantize(Matrix(2, 2, 0.5), h, GptqConfig{});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("pivot"), std::string::npos);
  }
}

TEST(GptqTest, ConfigAndShapeRejections) {
  GptqConfig bad;
  bad.damping_lambda = 0.0;
  EXPECT_THROW(gptq_quantize(Matrix(2, 2), {Matrix::identity(2), 2}, bad),
               ConfigError);
  bad = GptqConfig{};
  bad.block_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(gptq_quantize(Matrix(3, 2), {Matrix::identity(2), 2}, GptqConfig{}),
               ShapeError);
}

}  // namespace
}  // namespace dirotq
