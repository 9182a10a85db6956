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

#include "dirotq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

namespace dirotq {
namespace {

// Per-channel max-abs, then max / median, written as plain loops.
double ratio_oracle(const Matrix& x) {
  std::vector<double> amax;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double a = x(r, c) < 0 ? -x(r, c) : x(r, c);
      if (a > m) m = a;
    }
    amax.push_back(m);
  }
  double top = 0.0;
  for (double a : amax) top = a > top ? a : top;
  std::vector<double> s = amax;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      if (s[j] < s[i]) std::swap(s[i], s[j]);
  const std::size_t n = s.size();
  const double med = n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2;
  return top / med;
}

TEST(MaxMedianRatioTest, DirectConstructions) {
  Matrix x(1, 9, 1.0);
  x(0, 0) = 83.0;
  EXPECT_DOUBLE_EQ(max_median_ratio(x), 83.0);
  EXPECT_DOUBLE_EQ(max_median_ratio(Matrix(3, 5, -2.0)), 1.0);
  EXPECT_THROW(max_median_ratio(Matrix(3, 5)), ConfigError);
  EXPECT_THROW(max_median_ratio(Matrix()), ConfigError);
}

TEST(MaxMedianRatioTest, MatchesScalarLoopOracle) {
  SynthConfig cfg;
  for (std::size_t t : {0u, 7u, 13u}) {
    const Matrix x = generate(cfg, t);
    EXPECT_NEAR(max_median_ratio(x), ratio_oracle(x), 1e-12 * ratio_oracle(x));
  }
}

TEST(GenerateTest, HomogeneousChannels) {
  SynthConfig cfg;
  cfg.outlier_scale = 1.0;
  cfg.drift_amplitude = 0.0;
  cfg.tokens_per_step = 4096;
  cfg.seed = 3;
  EXPECT_LT(max_median_ratio(generate(cfg, 0)), 3.0);
}

TEST(GenerateTest, OutlierRatioInBand) {
  SynthConfig cfg;
  cfg.seed = 3;
  const double ratio = max_median_ratio(generate(cfg, 0));
  EXPECT_GE(ratio, 25.0);
  EXPECT_LE(ratio, 100.0);
}

TEST(GenerateTest, ShapeAndDeterminism) {
  SynthConfig cfg;
  cfg.tokens_per_step = 10;
  const Matrix a = generate(cfg, 4);
  EXPECT_EQ(a.rows(), 10u);
  EXPECT_EQ(a.cols(), 256u);
  EXPECT_EQ(a, generate(cfg, 4));
  EXPECT_NE(a, generate(cfg, 5));
  cfg.seed = 1;
  EXPECT_NE(a, generate(cfg, 4));
}

TEST(GenerateTest, StreamsAreIndependent) {
  SynthConfig cfg;
  const Matrix cal = generate_stream(cfg, SynthStream::calibration, 0, 2);
  const Matrix ev = generate_stream(cfg, SynthStream::evaluation, 0, 2);
  EXPECT_NE(cal, ev);
  EXPECT_EQ(channel_profile(cfg).outliers, channel_profile(cfg).outliers);
  EXPECT_NE(cal, generate_stream(cfg, SynthStream::calibration, 1, 2));
}

TEST(GenerateTest, DriftVisibleAcrossTimesteps) {
  SynthConfig cfg;
  cfg.drift_amplitude = 0.5;
  const std::size_t ch = channel_profile(cfg).outliers.front();
  double lo = 1e300, hi = 0.0;
  for (std::size_t t = 0; t < cfg.timesteps; ++t) {
    const Matrix x = generate(cfg, t);
    double m = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) m = std::max(m, std::abs(x(r, ch)));
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  EXPECT_GE(hi / lo, 1.5);
}

TEST(GenerateTest, LaplaceHasUnitVariance) {
  SynthConfig cfg;
  cfg.outlier_channels = 0;
  cfg.tokens_per_step = 512;
  cfg.base_distribution = BaseDistribution::laplace;
  const Matrix x = generate(cfg, 0);
  double s2 = 0.0;
  for (double v : x.data()) s2 += v * v;
  EXPECT_NEAR(s2 / static_cast<double>(x.size()), 1.0, 0.03);
}

TEST(GenerateTest, ChannelSpreadBroadensScales) {
  SynthConfig cfg;
  cfg.outlier_channels = 0;
  cfg.channel_scale_spread = 0.5;
  const auto p = channel_profile(cfg);
  const auto [lo, hi] = std::minmax_element(p.base_scale.begin(), p.base_scale.end());
  EXPECT_GT(*hi / *lo, 3.0);
}

TEST(GenerateTest, Rejections) {
  SynthConfig cfg;
  EXPECT_THROW(generate(cfg, cfg.timesteps), ConfigError);
  cfg.outlier_channels = cfg.channels;
  EXPECT_THROW(generate(cfg, 0), ConfigError);
  cfg = SynthConfig{};
  cfg.outlier_scale = 0.5;
  EXPECT_THROW(generate(cfg, 0), ConfigError);
  cfg = SynthConfig{};
  cfg.timesteps = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace dirotq
