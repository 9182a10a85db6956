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

// Synthetic DiT-like activations: i.i.d. Gaussian or Laplace tokens with a
// fixed per-channel scale profile, a handful of outlier channels scaled by
// `outlier_scale`, and a sinusoidal drift of those outliers over timesteps.
//
// The channel profile (outlier positions, base scales) depends only on
// `seed`. Token noise depends on (seed, stream, sample, timestep), so
// calibration and evaluation draw independent tokens from one profile.

#ifndef DIROTQ_SYNTH_HPP_
#define DIROTQ_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dirotq/error.hpp"
#include "dirotq/linalg.hpp"

namespace dirotq {

enum class BaseDistribution { gaussian, laplace };

struct SynthConfig {
  std::size_t channels = 256;
  std::size_t tokens_per_step = 64;
  std::size_t timesteps = 20;
  std::size_t outlier_channels = 4;
  double outlier_scale = 50.0;
  double drift_amplitude = 0.5;
  BaseDistribution base_distribution = BaseDistribution::gaussian;
  std::uint64_t seed = 0;
  // Log-normal spread of the per-channel base scale; 0 gives homogeneous
  // channels.
  double channel_scale_spread = 0.0;

  void validate() const {
    if (channels == 0) throw ConfigError("synth: channels must be >= 1");
    if (outlier_channels >= channels) {
      throw ConfigError("synth: outlier_channels must be < channels");
    }
    if (!(outlier_scale >= 1.0)) {
      throw ConfigError("synth: outlier_scale must be >= 1");
    }
    if (timesteps == 0) throw ConfigError("synth: timesteps must be >= 1");
    if (!(channel_scale_spread >= 0.0)) {
      throw ConfigError("synth: channel_scale_spread must be >= 0");
    }
  }

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

// Token streams; each draws independent noise from the same channel profile.
enum class SynthStream : std::uint64_t { calibration = 1, evaluation = 2 };

struct ChannelProfile {
  std::vector<double> base_scale;       // per channel
  std::vector<std::size_t> outliers;    // ascending channel indices
};

inline ChannelProfile channel_profile(const SynthConfig& cfg) {
  cfg.validate();
  ChannelProfile p;
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x70726f66ULL));
  std::normal_distribution<double> normal;
  p.base_scale.resize(cfg.channels);
  for (double& s : p.base_scale) {
    const double z = normal(rng);
    s = cfg.channel_scale_spread > 0.0 ? std::exp(cfg.channel_scale_spread * z)
                                       : 1.0;
  }
  std::vector<std::size_t> idx(cfg.channels);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  p.outliers.assign(idx.begin(),
                    idx.begin() + static_cast<std::ptrdiff_t>(cfg.outlier_channels));
  std::sort(p.outliers.begin(), p.outliers.end());
  return p;
}

// Multiplier applied to every outlier channel at timestep t.
inline double outlier_multiplier(const SynthConfig& cfg, std::size_t t) {
  return cfg.outlier_scale *
         (1.0 + cfg.drift_amplitude *
                    std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                             static_cast<double>(cfg.timesteps)));
}

inline Matrix generate_stream(const SynthConfig& cfg, SynthStream stream,
                              std::uint64_t sample, std::size_t t) {
  cfg.validate();
  if (t >= cfg.timesteps) {
    throw ConfigError("synth: timestep " + std::to_string(t) +
                      " out of range [0, " + std::to_string(cfg.timesteps) +
                      ")");
  }
  const ChannelProfile profile = channel_profile(cfg);
  std::vector<double> scale = profile.base_scale;
  const double mult = outlier_multiplier(cfg, t);
  for (std::size_t c : profile.outliers) scale[c] *= mult;

  std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(stream),
                                  sample, t));
  Matrix x(cfg.tokens_per_step, cfg.channels);
  if (cfg.base_distribution == BaseDistribution::gaussian) {
    std::normal_distribution<double> dist;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = scale[c] * dist(rng);
  } else {
    // Unit-variance Laplace: sign · Exp(1) / √2.
    std::exponential_distribution<double> expo(1.0);
    std::bernoulli_distribution coin(0.5);
    const double b = 1.0 / std::numbers::sqrt2;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double mag = b * expo(rng);
        x(r, c) = scale[c] * (coin(rng) ? mag : -mag);
      }
    }
  }
  return x;
}

// tokens_per_step × channels batch for timestep t; deterministic in
// (seed, t).
inline Matrix generate(const SynthConfig& cfg, std::size_t t) {
  return generate_stream(cfg, SynthStream::calibration, 0, t);
}

// Per-channel max-abs profile: max over channels divided by the median over
// channels.
inline double max_median_ratio(const Matrix& x) {
  if (x.empty()) throw ConfigError("max_median_ratio: empty input");
  std::vector<double> amax(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      amax[c] = std::max(amax[c], std::abs(x(r, c)));
  const double top = *std::max_element(amax.begin(), amax.end());
  std::vector<double> sorted = amax;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1
                            ? sorted[n / 2]
                            : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  if (!(median > 0.0)) {
    throw ConfigError("max_median_ratio: median channel max-abs is zero");
  }
  return top / median;
}

}  // namespace dirotq

#endif  // DIROTQ_SYNTH_HPP_
