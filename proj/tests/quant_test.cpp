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

#include "dirotq/quant.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace dirotq {
namespace {

const QuantSpec kSym4 =
    QuantSpec::integer(4, QuantMode::symmetric, Granularity::per_group, 64);
const QuantSpec kAsym4 =
    QuantSpec::integer(4, QuantMode::asymmetric, Granularity::per_group, 64);

Matrix row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Matrix::from_data(1, n, std::move(v));
}

TEST(QuantSpecTest, Ranges) {
  EXPECT_EQ(kSym4.q_min(), -7);
  EXPECT_EQ(kSym4.q_max(), 7);
  EXPECT_EQ(kAsym4.q_min(), 0);
  EXPECT_EQ(kAsym4.q_max(), 15);
  const auto s8 = QuantSpec::integer(8, QuantMode::symmetric, Granularity::per_token);
  EXPECT_EQ(s8.q_max(), 127);
}

TEST(QuantSpecTest, Float4ConstraintsEnforced) {
  QuantSpec s = QuantSpec::nvfp4();
  EXPECT_NO_THROW(s.validate());
  s.group_size = 32;
  EXPECT_THROW(s.validate(), ConfigError);
  s = QuantSpec::nvfp4();
  s.mode = QuantMode::asymmetric;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(QuantSpecTest, RejectsBadIntegerSpecs) {
  EXPECT_THROW(QuantSpec::integer(1, QuantMode::symmetric, Granularity::per_tensor)
                   .validate(),
               ConfigError);
  EXPECT_THROW(QuantSpec::integer(4, QuantMode::symmetric, Granularity::per_group, 0)
                   .validate(),
               ConfigError);
}

TEST(RoundingTest, HalfToEven) {
  EXPECT_EQ(round_half_even(0.5), 0.0);
  EXPECT_EQ(round_half_even(1.5), 2.0);
  EXPECT_EQ(round_half_even(2.5), 2.0);
  EXPECT_EQ(round_half_even(-0.5), 0.0);
  EXPECT_EQ(round_half_even(-1.5), -2.0);
  EXPECT_EQ(round_half_even(-2.5), -2.0);
  EXPECT_EQ(round_half_even(2.4999), 2.0);
  EXPECT_EQ(round_half_even(-2.5001), -3.0);
}

// Golden vectors.

TEST(GoldenTest, SymmetricInt4Group) {
  const Matrix x = row({0.1, -0.2, 0.3, -0.75});
  const QuantParams p = fit_params(x, kSym4);
  ASSERT_EQ(p.scales.size(), 1u);
  EXPECT_EQ(p.scales[0], 0.75 / 7.0);
  EXPECT_TRUE(p.zero_points.empty());

  const QuantResult r = quantize_dequantize(x, kSym4);
  EXPECT_EQ(r.q.codes, (std::vector<std::int32_t>{1, -2, 3, -7}));
  const double s = 0.75 / 7.0;
  EXPECT_EQ(r.x_hat, row({1 * s, -2 * s, 3 * s, -7 * s}));
}

TEST(GoldenTest, AsymmetricInt4Group) {
  const QuantParams p = fit_params(row({0.0, 1.5}), kAsym4);
  ASSERT_EQ(p.scales.size(), 1u);
  EXPECT_EQ(p.zero_points[0], 0.0);
  EXPECT_EQ(p.scales[0], 1.5 / 15.0);
  EXPECT_DOUBLE_EQ(p.scales[0], 0.1);
}

TEST(GoldenTest, AllZeroGroup) {
  for (const QuantSpec& spec : {kSym4, kAsym4, QuantSpec::nvfp4()}) {
    const Matrix x(1, 16);
    const QuantResult r = quantize_dequantize(x, spec);
    EXPECT_EQ(r.q.scales[0], 1.0);
    if (!r.q.zero_points.empty()) {
      EXPECT_EQ(r.q.zero_points[0], 0.0);
    }
    for (auto c : r.q.codes) EXPECT_EQ(c, 0);
    EXPECT_EQ(r.x_hat, x);
  }
}

TEST(GoldenTest, OnGridIsFixedPoint) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> code(-7, 7);
  const double s = 0.25;
  std::vector<double> v(64);
  for (double& e : v) e = code(rng) * s;
  v[0] = 7 * s;  // pin the group maximum so the fitted scale is s
  const Matrix x = row(v);
  EXPECT_EQ(quantize_dequantize(x, kSym4).x_hat, x);
}

TEST(GoldenTest, Float4RepresentableGroup) {
  // Group max 6 puts the group scale at 1.
  std::vector<double> v = {6, 3, 0.5, -6};
  v.resize(16, 0.0);
  const Matrix x = row(v);
  const QuantResult r = quantize_dequantize(x, QuantSpec::nvfp4());
  EXPECT_EQ(r.q.scales[0], 1.0);
  EXPECT_EQ(r.q.codes[0], 7);
  EXPECT_EQ(r.q.codes[1], 5);
  EXPECT_EQ(r.q.codes[2], 1);
  EXPECT_EQ(r.q.codes[3], -7);
  EXPECT_EQ(r.x_hat, x);
}

TEST(GoldenTest, Float4TiesGoToEvenMantissa) {
  EXPECT_EQ(snap_e2m1(0.25), 0);    // 0 | 0.5
  EXPECT_EQ(snap_e2m1(0.75), 2);    // 0.5 | 1.0
  EXPECT_EQ(snap_e2m1(1.25), 2);    // 1.0 | 1.5
  EXPECT_EQ(snap_e2m1(2.5), 4);     // 2 | 3
  EXPECT_EQ(snap_e2m1(5.0), 6);     // 4 | 6
  EXPECT_EQ(snap_e2m1(-3.5), -6);   // 3 | 4
  EXPECT_EQ(snap_e2m1(100.0), 7);
  EXPECT_EQ(snap_e2m1(-100.0), -7);
}

TEST(GoldenTest, E4m3Snapping) {
  EXPECT_EQ(snap_e4m3(448.0), 448.0);
  EXPECT_EQ(snap_e4m3(1000.0), 448.0);
  EXPECT_EQ(snap_e4m3(1.0), 1.0);
  EXPECT_EQ(snap_e4m3(1.0625), 1.0);   // halfway 1 | 1.125, even mantissa
  EXPECT_EQ(snap_e4m3(1.1875), 1.25);  // halfway 1.125 | 1.25
  EXPECT_EQ(snap_e4m3(std::ldexp(1.0, -9)), std::ldexp(1.0, -9));
  EXPECT_EQ(detail::e4m3_table().size(), 127u);
}

TEST(Float4Test, LargeGroupsUseTensorScale) {
  std::vector<double> v(32);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1e4 * std::sin(i + 1.0);
  const QuantResult r = quantize_dequantize(row(v), QuantSpec::nvfp4());
  EXPECT_GT(r.q.tensor_scale, 1.0);
  EXPECT_EQ(std::exp2(std::round(std::log2(r.q.tensor_scale))), r.q.tensor_scale);
  ASSERT_EQ(r.q.scales.size(), 2u);
  for (double s : r.q.scales) {
    const double s8 = s / r.q.tensor_scale;
    EXPECT_LE(s8, kE4m3Max);
    EXPECT_EQ(snap_e4m3(s8), s8);
  }
  for (auto c : r.q.codes) EXPECT_LE(std::abs(c), 7);
}

TEST(Fp16Test, RoundsThroughHalfPrecision) {
  EXPECT_EQ(round_to_fp16(1.0), 1.0);
  EXPECT_EQ(round_to_fp16(1.0 + std::ldexp(1.0, -11)), 1.0);  // tie to even
  EXPECT_EQ(round_to_fp16(1.0 + 3 * std::ldexp(1.0, -11)),
            1.0 + std::ldexp(1.0, -9));
  EXPECT_EQ(round_to_fp16(65504.0), 65504.0);
  EXPECT_TRUE(std::isinf(round_to_fp16(70000.0)));
  EXPECT_EQ(round_to_fp16(std::ldexp(1.0, -24)), std::ldexp(1.0, -24));
}

// Layout.

TEST(LayoutTest, RaggedTailGetsOwnGroup) {
  Matrix x(2, 70);
  for (std::size_t c = 0; c < 70; ++c) {
    x(0, c) = c < 64 ? 1.0 : 0.5;
    x(1, c) = 2.0;
  }
  const QuantParams p = fit_params(x, kSym4);
  ASSERT_EQ(p.scales.size(), 4u);
  EXPECT_EQ(p.scales[0], 1.0 / 7);
  EXPECT_EQ(p.scales[1], 0.5 / 7);
  EXPECT_EQ(p.scales[2], 2.0 / 7);
}

TEST(LayoutTest, ColumnAxisGroupsWeights) {
  const GroupLayout l = make_layout(130, 3, kSym4, GroupAxis::along_columns);
  EXPECT_EQ(l.group_count(), 9u);
  EXPECT_EQ(l.group_of(0, 0), 0u);
  EXPECT_EQ(l.group_of(64, 0), 1u);
  EXPECT_EQ(l.group_of(129, 0), 2u);
  EXPECT_EQ(l.group_of(0, 1), 3u);
}

TEST(LayoutTest, PerTokenAndPerChannel) {
  const auto tok = QuantSpec::integer(4, QuantMode::symmetric, Granularity::per_token);
  const auto ch = QuantSpec::integer(4, QuantMode::symmetric, Granularity::per_channel);
  const Matrix x = Matrix::from_rows({{1, 7}, {14, 0}});
  EXPECT_EQ(fit_params(x, tok).scales, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(fit_params(x, ch).scales, (std::vector<double>{2.0, 1.0}));
  const auto t = QuantSpec::integer(4, QuantMode::symmetric, Granularity::per_tensor);
  EXPECT_EQ(fit_params(x, t).scales, (std::vector<double>{2.0}));
}

TEST(QuantTest, RejectsNonFinite) {
  Matrix x(1, 4);
  x(0, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit_params(x, kSym4), NumericalError);
  EXPECT_THROW(quantize_dequantize(x, kAsym4), NumericalError);
}

TEST(QuantTest, ParamCountMismatchRejected) {
  QuantParams p;
  p.scales = {1.0, 1.0};
  EXPECT_THROW(quantize_with_params(Matrix(1, 4), p, kSym4), ShapeError);
}

// quant_error.

TEST(QuantErrorTest, ClosedForms) {
  const Matrix x = Matrix::from_rows({{1, 0}, {0, 1}});
  EXPECT_EQ(quant_error(x, x), 0.0);
  EXPECT_EQ(quant_error(x, Matrix(2, 2)), 2.0);
  EXPECT_THROW(quant_error(x, Matrix(2, 3)), ShapeError);
}

TEST(QuantErrorTest, MatchesScalarLoopOracle) {
  const Matrix x = gaussian_matrix(32, 32, 3);
  const Matrix x_hat = quantize_dequantize(x, kSym4).x_hat;
  const double ref = oracle::sum_of_squares_diff(x, x_hat);
  EXPECT_NEAR(quant_error(x, x_hat), ref, 1e-12 * ref);
}

TEST(QuantErrorTest, AdditiveOverChannels) {
  const Matrix x = gaussian_matrix(40, 12, 4);
  const Matrix x_hat = quantize_dequantize(x, kAsym4).x_hat;
  double sum = 0.0;
  for (std::size_t c = 0; c < 12; ++c)
    sum += quant_error(column_slice(x, c, c + 1), column_slice(x_hat, c, c + 1));
  EXPECT_NEAR(quant_error(x, x_hat), sum, 1e-12 * sum);
}

// Properties over random fixtures.

QuantSpec random_spec(std::mt19937_64& rng) {
  switch (rng() % 5) {
    case 0:
      return kSym4;
    case 1:
      return kAsym4;
    case 2:
      return QuantSpec::integer(8, QuantMode::symmetric, Granularity::per_group, 64);
    case 3:
      return QuantSpec::integer(8, QuantMode::asymmetric, Granularity::per_group, 64);
    default:
      return QuantSpec::nvfp4();
  }
}

TEST(QuantPropertyTest, IdempotentOnTenThousandFixtures) {
  std::mt19937_64 rng(2026);
  std::lognormal_distribution<double> mag(0.0, 2.0);
  std::normal_distribution<double> n01;
  int failures = 0;
  for (int f = 0; f < 10000; ++f) {
    const QuantSpec spec = random_spec(rng);
    const std::size_t len = 1 + rng() % spec.group_size;
    const double scale = mag(rng);
    std::vector<double> v(len);
    for (double& e : v) e = scale * n01(rng) + (rng() % 4 == 0 ? scale : 0.0);
    const Matrix x = row(v);
    const QuantParams p = fit_params(x, spec);
    const QuantizedTensor q = quantize_with_params(x, p, spec);
    const Matrix x_hat = dequantize(q);
    const QuantizedTensor q2 = quantize_with_params(x_hat, p, spec);
    if (q2.codes != q.codes || dequantize(q2) != x_hat) ++failures;
  }
  EXPECT_EQ(failures, 0);
}

TEST(QuantPropertyTest, SymmetricErrorBoundAndExactMaximum) {
  std::mt19937_64 rng(5);
  for (int f = 0; f < 200; ++f) {
    const Matrix x = gaussian_matrix(4, 150, rng(), 1.0 + f % 7);
    const QuantResult r = quantize_dequantize(x, kSym4);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) {
        const double s = r.q.scales[r.q.layout.group_of(i, j)];
        ASSERT_LE(std::abs(x(i, j) - r.x_hat(i, j)), 0.5 * s * (1 + 1e-12));
        ASSERT_GT(s, 0.0);
      }
    }
    // The group maximum lands on ±q_max.
    for (std::size_t g = 0; g < r.q.layout.group_count(); ++g) {
      double amax = 0.0;
      std::size_t at = 0;
      for (std::size_t j = 0; j < x.cols(); ++j) {
        if (r.q.layout.group_of(0, j) != g) continue;
        if (std::abs(x(0, j)) > amax) amax = std::abs(x(0, j)), at = j;
      }
      if (amax == 0.0) continue;
      EXPECT_EQ(std::abs(r.q.codes[at]), 7);
      EXPECT_NEAR(std::abs(r.x_hat(0, at)), amax, 4 * std::numeric_limits<double>::epsilon() * amax);
    }
  }
}

TEST(QuantPropertyTest, AsymmetricCodesInRangeAndBounded) {
  const Matrix x = gaussian_matrix(16, 200, 9);
  const QuantResult r = quantize_dequantize(x, kAsym4);
  for (auto c : r.q.codes) {
    EXPECT_GE(c, 0);
    EXPECT_LE(c, 15);
  }
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double s = r.q.scales[r.q.layout.group_of(i, j)];
      EXPECT_LE(std::abs(x(i, j) - r.x_hat(i, j)), 0.5 * s * (1 + 1e-9));
    }
}

TEST(QuantPropertyTest, Deterministic) {
  const Matrix x = gaussian_matrix(8, 100, 12);
  for (const QuantSpec& spec : {kSym4, kAsym4, QuantSpec::nvfp4()}) {
    const QuantResult a = quantize_dequantize(x, spec);
    const QuantResult b = quantize_dequantize(x, spec);
    EXPECT_EQ(a.q.codes, b.q.codes);
    EXPECT_EQ(a.q.scales, b.q.scales);
    EXPECT_EQ(a.q.zero_points, b.q.zero_points);
    EXPECT_EQ(a.x_hat, b.x_hat);
  }
}

TEST(QuantPropertyTest, Int8BeatsInt4ByRoughlyTwentyFourDb) {
  const Matrix x = gaussian_matrix(64, 256, 13);
  const auto s8 = QuantSpec::integer(8, QuantMode::symmetric, Granularity::per_group, 64);
  const double e4 = quant_error(x, quantize_dequantize(x, kSym4).x_hat);
  const double e8 = quant_error(x, quantize_dequantize(x, s8).x_hat);
  EXPECT_GT(10 * std::log10(e4 / e8), 20.0);
}

}  // namespace
}  // namespace dirotq
