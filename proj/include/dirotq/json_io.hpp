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

// JSON forms of the library's configuration and report types. Readers merge
// onto defaults: absent keys keep their default, unknown keys are errors.

#ifndef DIROTQ_JSON_IO_HPP_
#define DIROTQ_JSON_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dirotq/error.hpp"
#include "dirotq/gptq.hpp"
#include "dirotq/judge.hpp"
#include "dirotq/metrics.hpp"
#include "dirotq/quant.hpp"
#include "dirotq/synth.hpp"

namespace dirotq {

using Json = nlohmann::ordered_json;

namespace detail {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

template <typename E, std::size_t N>
std::string enum_to_string(E v, const EnumName<E> (&table)[N]) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  throw ConfigError("unnamed enum value");
}

template <typename E, std::size_t N>
E enum_from_string(const std::string& s, const EnumName<E> (&table)[N],
                   const char* what) {
  for (const auto& e : table)
    if (s == e.name) return e.value;
  std::string options;
  for (const auto& e : table)
    options += std::string(options.empty() ? "" : ", ") + e.name;
  throw ConfigError(std::string("unknown ") + what + " '" + s +
                    "' (expected one of: " + options + ")");
}

inline constexpr EnumName<NumberFamily> kFamilyNames[] = {
    {NumberFamily::integer, "integer"}, {NumberFamily::float4, "float4"}};
inline constexpr EnumName<QuantMode> kModeNames[] = {
    {QuantMode::symmetric, "symmetric"}, {QuantMode::asymmetric, "asymmetric"}};
inline constexpr EnumName<Granularity> kGranularityNames[] = {
    {Granularity::per_tensor, "per_tensor"},
    {Granularity::per_channel, "per_channel"},
    {Granularity::per_token, "per_token"},
    {Granularity::per_group, "per_group"}};
inline constexpr EnumName<ScaleFormat> kScaleFormatNames[] = {
    {ScaleFormat::real16_emulated, "real16_emulated"},
    {ScaleFormat::fp8_e4m3_emulated, "fp8_e4m3_emulated"}};
inline constexpr EnumName<BaseDistribution> kDistributionNames[] = {
    {BaseDistribution::gaussian, "gaussian"},
    {BaseDistribution::laplace, "laplace"}};

inline void require_object(const Json& j, const char* what) {
  if (!j.is_object()) {
    throw ConfigError(std::string(what) + " must be a JSON object");
  }
}

inline void reject_unknown_keys(const Json& j, std::set<std::string> known,
                                const char* what) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError(std::string("unknown key '") + key + "' in " + what);
    }
  }
}

// Reads j[key] into out when present, with a readable error on type clash.
template <typename T>
void read_field(const Json& j, const char* key, T& out, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + "." + key + ": " + e.what());
  }
}

inline std::string read_string(const Json& j, const char* key,
                               const std::string& fallback, const char* what) {
  std::string s = fallback;
  read_field(j, key, s, what);
  return s;
}

}  // namespace detail

inline std::string to_string(NumberFamily v) {
  return detail::enum_to_string(v, detail::kFamilyNames);
}
inline std::string to_string(QuantMode v) {
  return detail::enum_to_string(v, detail::kModeNames);
}
inline std::string to_string(Granularity v) {
  return detail::enum_to_string(v, detail::kGranularityNames);
}
inline std::string to_string(ScaleFormat v) {
  return detail::enum_to_string(v, detail::kScaleFormatNames);
}
inline std::string to_string(BaseDistribution v) {
  return detail::enum_to_string(v, detail::kDistributionNames);
}

// --- QuantSpec -----------------------------------------------------------

inline Json to_json(const QuantSpec& s) {
  return Json{{"bits", s.bits},
              {"family", to_string(s.family)},
              {"mode", to_string(s.mode)},
              {"granularity", to_string(s.granularity)},
              {"group_size", s.group_size},
              {"scale_format", to_string(s.scale_format)}};
}

// Pass-through (no quantization) is JSON null.
inline Json to_json(const std::optional<QuantSpec>& s) {
  return s ? to_json(*s) : Json(nullptr);
}

// The string "nvfp4" is shorthand for the NVFP4 preset.
inline std::optional<QuantSpec> quant_spec_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string() && j.get<std::string>() == "nvfp4") {
    return QuantSpec::nvfp4();
  }
  detail::require_object(j, "quant spec");
  detail::reject_unknown_keys(
      j, {"bits", "family", "mode", "granularity", "group_size", "scale_format"},
      "quant spec");
  QuantSpec s;
  const std::string family =
      detail::read_string(j, "family", to_string(s.family), "quant spec");
  s.family = detail::enum_from_string(family, detail::kFamilyNames, "family");
  if (s.family == NumberFamily::float4) s = QuantSpec::nvfp4();
  detail::read_field(j, "bits", s.bits, "quant spec");
  s.mode = detail::enum_from_string(
      detail::read_string(j, "mode", to_string(s.mode), "quant spec"),
      detail::kModeNames, "mode");
  s.granularity = detail::enum_from_string(
      detail::read_string(j, "granularity", to_string(s.granularity),
                          "quant spec"),
      detail::kGranularityNames, "granularity");
  detail::read_field(j, "group_size", s.group_size, "quant spec");
  s.scale_format = detail::enum_from_string(
      detail::read_string(j, "scale_format", to_string(s.scale_format),
                          "quant spec"),
      detail::kScaleFormatNames, "scale_format");
  s.validate();
  return s;
}

// --- SynthConfig / GptqConfig --------------------------------------------

inline Json to_json(const SynthConfig& c) {
  return Json{{"channels", c.channels},
              {"tokens_per_step", c.tokens_per_step},
              {"timesteps", c.timesteps},
              {"outlier_channels", c.outlier_channels},
              {"outlier_scale", c.outlier_scale},
              {"drift_amplitude", c.drift_amplitude},
              {"base_distribution", to_string(c.base_distribution)},
              {"seed", c.seed},
              {"channel_scale_spread", c.channel_scale_spread}};
}

inline SynthConfig synth_config_from_json(const Json& j,
                                          SynthConfig base = {}) {
  detail::require_object(j, "synth");
  detail::reject_unknown_keys(
      j,
      {"channels", "tokens_per_step", "timesteps", "outlier_channels",
       "outlier_scale", "drift_amplitude", "base_distribution", "seed",
       "channel_scale_spread"},
      "synth");
  const char* w = "synth";
  detail::read_field(j, "channels", base.channels, w);
  detail::read_field(j, "tokens_per_step", base.tokens_per_step, w);
  detail::read_field(j, "timesteps", base.timesteps, w);
  detail::read_field(j, "outlier_channels", base.outlier_channels, w);
  detail::read_field(j, "outlier_scale", base.outlier_scale, w);
  detail::read_field(j, "drift_amplitude", base.drift_amplitude, w);
  base.base_distribution = detail::enum_from_string(
      detail::read_string(j, "base_distribution",
                          to_string(base.base_distribution), w),
      detail::kDistributionNames, "base_distribution");
  detail::read_field(j, "seed", base.seed, w);
  detail::read_field(j, "channel_scale_spread", base.channel_scale_spread, w);
  base.validate();
  return base;
}

inline Json to_json(const GptqConfig& c) {
  return Json{{"damping_lambda", c.damping_lambda},
              {"block_size", c.block_size},
              {"spec", to_json(c.spec)}};
}

inline GptqConfig gptq_config_from_json(const Json& j, GptqConfig base = {}) {
  detail::require_object(j, "gptq");
  detail::reject_unknown_keys(j, {"damping_lambda", "block_size", "spec"},
                              "gptq");
  detail::read_field(j, "damping_lambda", base.damping_lambda, "gptq");
  detail::read_field(j, "block_size", base.block_size, "gptq");
  if (j.contains("spec")) {
    auto s = quant_spec_from_json(j.at("spec"));
    if (!s) throw ConfigError("gptq.spec cannot be null");
    base.spec = *s;
  }
  base.validate();
  return base;
}

// --- Reports ---------------------------------------------------------------

inline Json to_json(const QsnrReport& r) {
  Json j{{"layer_id", r.layer_id},
         {"timestep", r.timestep},
         {"method_label", r.method_label},
         {"side", r.side},
         {"qsnr_db", r.qsnr_db}};
  j["branch_breakdown"] =
      r.branch_breakdown ? Json{{"high_db", r.branch_breakdown->high_db},
                                {"low_db", r.branch_breakdown->low_db}}
                         : Json(nullptr);
  return j;
}

inline Json to_json(const Rates& r) {
  return Json{{"win", r.win}, {"tie", r.tie}, {"loss", r.loss}, {"n", r.n}};
}

inline Json to_json(const PairwiseResult& p) {
  Json cats = Json::object();
  for (const auto& [name, rates] : p.per_category) cats[name] = to_json(rates);
  return Json{{"win_rate", p.win_rate},
              {"tie_rate", p.tie_rate},
              {"loss_rate", p.loss_rate},
              {"n", p.n},
              {"per_category", cats}};
}

// --- Judge score records ---------------------------------------------------

// Accepts the record field names directly, or a judge response carrying
// semantic_consistency / perceptual_quality in place of sc / pq. A
// response's own "overall" and "rationale" are ignored; overall is always
// recomputed from SC and PQ.
inline ScoreRecord score_record_from_json(const Json& j) {
  detail::require_object(j, "score record");
  ScoreRecord r;
  const char* w = "score record";
  if (!j.contains("image_id")) throw FormatError("missing 'image_id'");
  detail::read_field(j, "image_id", r.image_id, w);
  r.prompt_category = "uncategorized";
  detail::read_field(j, "prompt_category", r.prompt_category, w);
  detail::read_field(j, "method_label", r.method_label, w);
  detail::read_field(j, "judge_label", r.judge_label, w);
  detail::read_field(j, "run_index", r.run_index, w);
  auto pick = [&](const char* key, const char* alias, double& out) {
    if (j.contains(key)) {
      detail::read_field(j, key, out, w);
    } else if (j.contains(alias)) {
      detail::read_field(j, alias, out, w);
    } else {
      throw FormatError(std::string("missing '") + key + "' (or '" + alias +
                        "')");
    }
  };
  pick("sc", "semantic_consistency", r.sc);
  pick("pq", "perceptual_quality", r.pq);
  check_score(r.sc, "sc");
  check_score(r.pq, "pq");
  return r;
}

// One record per non-blank line. Any bad line aborts with its 1-based
// line number.
inline std::vector<ScoreRecord> read_score_lines(std::istream& in,
                                                 const std::string& source) {
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(score_record_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(source + ":" + std::to_string(lineno) +
                        ": malformed JSON: " + e.what());
    } catch (const Error& e) {
      throw FormatError(source + ":" + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return out;
}

}  // namespace dirotq

#endif  // DIROTQ_JSON_IO_HPP_
