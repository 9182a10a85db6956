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

// Workbench commands behind the `dirotq` tool: calibrate, quantize, eval,
// sweep and judge. Each command reads a RunConfig, writes its artifacts
// under output_dir, and returns a JSON summary.
//
// Layers come either from the synthetic suite (default) or from a data
// directory laid out as
//
//   <data>/<layer_id>/weight.drtq        m × n
//   <data>/<layer_id>/calib/*.drtq       calibration batches, tokens × m
//   <data>/<layer_id>/eval/*.drtq        evaluation batches, tokens × m
//
// Batches are read in file-name order; the i-th eval batch is reported as
// timestep i.

#ifndef DIROTQ_COMMANDS_HPP_
#define DIROTQ_COMMANDS_HPP_

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dirotq/calib.hpp"
#include "dirotq/error.hpp"
#include "dirotq/json_io.hpp"
#include "dirotq/judge.hpp"
#include "dirotq/metrics.hpp"
#include "dirotq/pipeline.hpp"
#include "dirotq/rotation.hpp"
#include "dirotq/store.hpp"
#include "dirotq/synth.hpp"
#include "dirotq/tensor_io.hpp"

namespace dirotq {

struct RunConfig {
  double r = 0.10;
  std::optional<QuantSpec> act_spec = default_act_spec();
  std::optional<QuantSpec> weight_spec = default_weight_spec();
  bool gptq_enabled = true;
  GptqConfig gptq;  // spec always follows weight_spec
  std::uint64_t r_seed = 0;
  SynthConfig synth = default_suite_synth();  // per-layer template
  std::size_t calib_samples = 128;
  std::size_t timesteps = 20;  // overrides synth.timesteps
  std::string output_dir = "dirotq_out";
  std::size_t layers = 2;
  std::size_t out_features = 256;
  double pca_damping = 0.01;
  std::vector<std::size_t> eval_timesteps = {0, 5, 10, 15, 19};

  SynthConfig layer_template() const {
    SynthConfig s = synth;
    s.timesteps = timesteps;
    return s;
  }

  PipelineConfig pipeline() const {
    PipelineConfig p;
    p.r = r;
    p.act_spec = act_spec;
    p.weight_spec = weight_spec;
    p.gptq_enabled = gptq_enabled;
    p.gptq = gptq;
    if (weight_spec) p.gptq.spec = *weight_spec;
    p.pca_damping = pca_damping;
    p.r_seed = r_seed;
    return p;
  }

  void validate() const {
    if (calib_samples == 0) throw ConfigError("calib_samples must be >= 1");
    if (timesteps == 0) throw ConfigError("timesteps must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    pipeline().validate();
    make_suite(layer_template(), layers, out_features, calib_samples,
               eval_timesteps);
  }
};

inline Json to_json(const RunConfig& c) {
  return Json{{"r", c.r},
              {"act_spec", to_json(c.act_spec)},
              {"weight_spec", to_json(c.weight_spec)},
              {"gptq",
               Json{{"enabled", c.gptq_enabled},
                    {"damping_lambda", c.gptq.damping_lambda},
                    {"block_size", c.gptq.block_size}}},
              {"r_seed", c.r_seed},
              {"synth", to_json(c.synth)},
              {"calib_samples", c.calib_samples},
              {"timesteps", c.timesteps},
              {"output_dir", c.output_dir},
              {"layers", c.layers},
              {"out_features", c.out_features},
              {"pca_damping", c.pca_damping},
              {"eval_timesteps", c.eval_timesteps}};
}

inline RunConfig run_config_from_json(const Json& j, RunConfig base = {}) {
  detail::require_object(j, "config");
  detail::reject_unknown_keys(
      j,
      {"r", "act_spec", "weight_spec", "gptq", "r_seed", "synth",
       "calib_samples", "timesteps", "output_dir", "layers", "out_features",
       "pca_damping", "eval_timesteps"},
      "config");
  const char* w = "config";
  detail::read_field(j, "r", base.r, w);
  if (j.contains("act_spec")) base.act_spec = quant_spec_from_json(j["act_spec"]);
  if (j.contains("weight_spec")) {
    base.weight_spec = quant_spec_from_json(j["weight_spec"]);
  }
  if (j.contains("gptq")) {
    const Json& g = j["gptq"];
    detail::require_object(g, "gptq");
    detail::reject_unknown_keys(g, {"enabled", "damping_lambda", "block_size"},
                                "gptq");
    detail::read_field(g, "enabled", base.gptq_enabled, "gptq");
    detail::read_field(g, "damping_lambda", base.gptq.damping_lambda, "gptq");
    detail::read_field(g, "block_size", base.gptq.block_size, "gptq");
  }
  detail::read_field(j, "r_seed", base.r_seed, w);
  if (j.contains("synth")) {
    base.synth = synth_config_from_json(j["synth"], base.synth);
  }
  detail::read_field(j, "calib_samples", base.calib_samples, w);
  detail::read_field(j, "timesteps", base.timesteps, w);
  detail::read_field(j, "output_dir", base.output_dir, w);
  detail::read_field(j, "layers", base.layers, w);
  detail::read_field(j, "out_features", base.out_features, w);
  detail::read_field(j, "pca_damping", base.pca_damping, w);
  detail::read_field(j, "eval_timesteps", base.eval_timesteps, w);
  return base;
}

inline RunConfig load_run_config(const std::filesystem::path& path,
                                 RunConfig base = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return run_config_from_json(j, std::move(base));
}

// DIRQ_SEED, when set, replaces synth.seed.
inline void apply_seed_env(RunConfig& cfg) {
  const char* env = std::getenv("DIRQ_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0' || env[0] == '-') {
    throw ConfigError(std::string("DIRQ_SEED is not an unsigned integer: '") +
                      env + "'");
  }
  cfg.synth.seed = v;
}

// "a:b:c" → a, a+c, … up to b inclusive. Values are rounded to 1e-9 so
// 0.05:0.25:0.05 yields exactly 0.05, 0.1, 0.15, 0.2, 0.25.
inline std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw ConfigError("bad number '" + item + "' in range '" + text + "'");
    }
    parts.push_back(v);
  }
  if (parts.size() != 3) {
    throw ConfigError("range must look like start:stop:step, got '" + text +
                      "'");
  }
  const double start = parts[0], stop = parts[1], step = parts[2];
  if (!(step > 0.0) || stop < start) {
    throw ConfigError("range needs step > 0 and stop >= start: '" + text + "'");
  }
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double v =
        std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9;
    if (v > stop + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

// --- Layer sources -------------------------------------------------------

class LayerSource {
 public:
  LayerSource(const RunConfig& cfg,
              std::optional<std::filesystem::path> data_dir)
      : data_dir_(std::move(data_dir)) {
    if (data_dir_) {
      if (!std::filesystem::is_directory(*data_dir_)) {
        throw ConfigError("data directory not found: " + data_dir_->string());
      }
      for (const auto& e : std::filesystem::directory_iterator(*data_dir_))
        if (e.is_directory()) ids_.push_back(e.path().filename().string());
      std::sort(ids_.begin(), ids_.end());
      if (ids_.empty()) {
        throw ConfigError("data directory has no layer subdirectories: " +
                          data_dir_->string());
      }
    } else {
      suite_ = make_suite(cfg.layer_template(), cfg.layers, cfg.out_features,
                          cfg.calib_samples, cfg.eval_timesteps);
      for (const auto& l : suite_.layers) ids_.push_back(l.layer_id);
    }
  }

  const std::vector<std::string>& ids() const { return ids_; }

  SecondMomentAccumulator accumulate(std::size_t i) const {
    if (!data_dir_) {
      return synthetic_accumulator(suite_.layers[i].synth,
                                   suite_.calib_samples);
    }
    const auto files = batch_files(i, "calib");
    SecondMomentAccumulator acc;
    for (const auto& f : files) {
      const Matrix x = read_matrix(f);
      if (acc.dim() == 0) acc = SecondMomentAccumulator(x.cols());
      acc.add(x);
    }
    return acc;
  }

  Matrix weight(std::size_t i) const {
    if (!data_dir_) return synthetic_weight(suite_.layers[i]);
    return read_matrix(*data_dir_ / ids_[i] / "weight.drtq");
  }

  // (timestep label, batch) pairs.
  std::vector<std::pair<std::size_t, Matrix>> eval_batches(
      std::size_t i) const {
    std::vector<std::pair<std::size_t, Matrix>> out;
    if (!data_dir_) {
      for (std::size_t t : suite_.eval_timesteps)
        out.emplace_back(t, synthetic_eval_batch(suite_.layers[i].synth, t));
      return out;
    }
    const auto files = batch_files(i, "eval");
    for (std::size_t t = 0; t < files.size(); ++t)
      out.emplace_back(t, read_matrix(files[t]));
    return out;
  }

 private:
  std::vector<std::filesystem::path> batch_files(std::size_t i,
                                                 const char* sub) const {
    const auto dir = *data_dir_ / ids_[i] / sub;
    if (!std::filesystem::is_directory(dir)) {
      throw ConfigError("missing directory " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".drtq")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no .drtq batches in " + dir.string());
    return files;
  }

  std::optional<std::filesystem::path> data_dir_;
  SuiteConfig suite_;
  std::vector<std::string> ids_;
};

// --- Commands --------------------------------------------------------------

inline std::filesystem::path calib_dir(const RunConfig& cfg) {
  return std::filesystem::path(cfg.output_dir) / "calib";
}
inline std::filesystem::path fused_dir(const RunConfig& cfg) {
  return std::filesystem::path(cfg.output_dir) / "fused";
}
inline std::filesystem::path eval_dir(const RunConfig& cfg) {
  return std::filesystem::path(cfg.output_dir) / "eval";
}

// Accumulates every calibration batch per layer, finalizes the PCA basis,
// and writes <out>/calib/<layer>/{accumulator, basis} plus layers.json.
inline Json cmd_calibrate(const RunConfig& cfg,
                          const std::optional<std::filesystem::path>& data = {}) {
  cfg.validate();
  const LayerSource src(cfg, data);
  const auto root = calib_dir(cfg);
  std::filesystem::create_directories(root);
  Json layers = Json::array();
  for (std::size_t i = 0; i < src.ids().size(); ++i) {
    const std::string& id = src.ids()[i];
    const SecondMomentAccumulator acc = src.accumulate(i);
    const PcaBasis pca = finalize_pca(acc, cfg.r, cfg.pca_damping, id);
    save_accumulator(root / id, acc, id);
    save_pca(root / id, pca);
    layers.push_back(Json{{"layer_id", id},
                          {"m", pca.dim()},
                          {"k", pca.rank_k},
                          {"token_count", acc.token_count()}});
  }
  Json summary{{"command", "calibrate"}, {"config", to_json(cfg)},
               {"layers", layers}};
  write_json(root / "layers.json", summary);
  return summary;
}

inline std::vector<std::string> listed_layers(const std::filesystem::path& dir,
                                              const char* file,
                                              const char* what) {
  const auto path = dir / file;
  if (!std::filesystem::exists(path)) {
    throw ConfigError(std::string("no ") + what + " found at " + dir.string() +
                      " (missing " + file + ")");
  }
  const Json j = read_json(path);
  std::vector<std::string> ids;
  try {
    for (const auto& l : j.at("layers"))
      ids.push_back(l.at("layer_id").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return ids;
}

// Rotates and quantizes every calibrated layer. The summary records the
// residual-slab weight error ‖W̃_l − Ŵ_l‖²_F per layer.
inline Json cmd_quantize(const RunConfig& cfg,
                         const std::optional<std::filesystem::path>& basis_dir,
                         const std::optional<std::filesystem::path>& data = {}) {
  cfg.validate();
  const auto bdir = basis_dir.value_or(calib_dir(cfg));
  const std::vector<std::string> ids = listed_layers(bdir, "layers.json", "bases");
  const LayerSource src(cfg, data);
  if (src.ids() != ids) {
    throw ConfigError("calibrated layers do not match the layer source");
  }
  const PipelineConfig pcfg = cfg.pipeline();
  const auto root = fused_dir(cfg);
  std::filesystem::create_directories(root);
  OrthogonalCache cache;
  Json layers = Json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const PcaBasis pca = load_pca(bdir / ids[i]);
    const SecondMomentAccumulator acc = load_accumulator(bdir / ids[i]);
    const Matrix w = src.weight(i);
    const FusedLayer layer = quantize_layer(pca, w, acc, pcfg, cache);
    save_fused_layer(root / ids[i], layer);
    const double err = quant_error(layer.w_low_ref, layer.w_low_hat);
    const double ref = frobenius_sq(layer.w_low_ref);
    layers.push_back(Json{{"layer_id", ids[i]},
                          {"m", layer.in_features()},
                          {"n", layer.out_features()},
                          {"k", layer.rotation.rank_k},
                          {"gptq", layer.gptq.has_value()},
                          {"weight_error_sq", err},
                          {"weight_relative_error",
                           ref > 0.0 ? std::sqrt(err / ref) : 0.0}});
  }
  Json summary{{"command", "quantize"}, {"config", to_json(cfg)},
               {"layers", layers}};
  write_json(root / "summary.json", summary);
  return summary;
}

// Reads `<out>/fused` and writes eval/reports.jsonl: for each layer and
// timestep, rtn_baseline then dirotq, output side then input side. With
// sweep_r, also writes eval/sweep.csv from the stored accumulators.
inline Json cmd_eval(const RunConfig& cfg,
                     const std::optional<std::filesystem::path>& fused = {},
                     const std::optional<std::filesystem::path>& data = {},
                     const std::vector<double>& sweep_r = {}) {
  cfg.validate();
  const auto fdir = fused.value_or(fused_dir(cfg));
  const std::vector<std::string> ids = listed_layers(fdir, "summary.json", "fused layers");
  const LayerSource src(cfg, data);
  if (src.ids() != ids) {
    throw ConfigError("fused layers do not match the layer source");
  }
  const auto root = eval_dir(cfg);
  std::filesystem::create_directories(root);
  std::ofstream out(root / "reports.jsonl", std::ios::trunc);
  if (!out) throw FormatError("cannot write " + (root / "reports.jsonl").string());

  Json per_layer = Json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const FusedLayer layer = load_fused_layer(fdir / ids[i]);
    const Matrix w = src.weight(i);
    const RtnLayer rtn = make_rtn_layer(w, layer.weight_spec, layer.act_spec);
    double sum_d = 0.0, sum_r = 0.0;
    std::size_t n = 0;
    for (const auto& [t, x] : src.eval_batches(i)) {
      const LayerEval e = evaluate_layer(layer, rtn, w, x);
      const QsnrReport reports[] = {
          {ids[i], t, "rtn_baseline", "output", e.rtn_output_db, std::nullopt},
          {ids[i], t, "rtn_baseline", "input", e.rtn_input_db, std::nullopt},
          {ids[i], t, "dirotq", "output", e.dirotq_output_db,
           e.dirotq_branches},
          {ids[i], t, "dirotq", "input", e.dirotq_input_db, e.dirotq_branches}};
      for (const QsnrReport& r : reports) out << to_json(r).dump() << '\n';
      sum_d += e.dirotq_output_db;
      sum_r += e.rtn_output_db;
      ++n;
    }
    per_layer.push_back(Json{{"layer_id", ids[i]},
                             {"timesteps", n},
                             {"dirotq_mean_output_db", sum_d / n},
                             {"rtn_mean_output_db", sum_r / n}});
  }
  out.close();
  Json summary{{"command", "eval"}, {"layers", per_layer}};

  if (!sweep_r.empty()) {
    const auto bdir = calib_dir(cfg);
    std::vector<SweepLayer> layers;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      SweepLayer l{ids[i], load_accumulator(bdir / ids[i]), src.weight(i), {}};
      for (auto& [t, x] : src.eval_batches(i)) l.eval_inputs.push_back(x);
      layers.push_back(std::move(l));
    }
    OrthogonalCache cache;
    const auto rows = r_sweep(layers, sweep_r, cfg.pipeline(), cache);
    std::ofstream csv(root / "sweep.csv", std::ios::trunc);
    csv << "r,qsnr_db\n";
    Json jrows = Json::array();
    for (const SweepRow& row : rows) {
      csv << nlohmann::json(row.r).dump() << ','
          << nlohmann::json(row.qsnr_db).dump() << '\n';
      jrows.push_back(Json{{"r", row.r}, {"qsnr_db", row.qsnr_db}});
    }
    summary["sweep"] = jrows;
  }
  write_json(root / "summary.json", summary);
  return summary;
}

// Calibrates in memory and writes <out>/sweep.csv.
inline Json cmd_sweep(const RunConfig& cfg, const std::vector<double>& r_values,
                      const std::optional<std::filesystem::path>& data = {}) {
  cfg.validate();
  const LayerSource src(cfg, data);
  std::vector<SweepLayer> layers;
  for (std::size_t i = 0; i < src.ids().size(); ++i) {
    SweepLayer l{src.ids()[i], src.accumulate(i), src.weight(i), {}};
    for (auto& [t, x] : src.eval_batches(i)) l.eval_inputs.push_back(x);
    layers.push_back(std::move(l));
  }
  OrthogonalCache cache;
  const auto rows = r_sweep(layers, r_values, cfg.pipeline(), cache);
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream csv(std::filesystem::path(cfg.output_dir) / "sweep.csv",
                    std::ios::trunc);
  csv << "r,qsnr_db\n";
  Json jrows = Json::array();
  for (const SweepRow& row : rows) {
    csv << nlohmann::json(row.r).dump() << ','
        << nlohmann::json(row.qsnr_db).dump() << '\n';
    jrows.push_back(
        Json{{"r", row.r}, {"k", row.rank_k}, {"qsnr_db", row.qsnr_db}});
  }
  return Json{{"command", "sweep"}, {"rows", jrows}};
}

struct JudgeOptions {
  double tie_eps = 0.01;
  JudgeMetric metric = JudgeMetric::overall;
  AggregationOrder order = AggregationOrder::overall_of_means;
  std::string method_a;  // empty = every record in file a
  std::string method_b;
};

inline std::vector<ScoreRecord> read_score_file(
    const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open score file " + path.string());
  return read_score_lines(f, path.string());
}

inline PairwiseResult cmd_judge(const std::filesystem::path& a_file,
                                const std::filesystem::path& b_file,
                                const JudgeOptions& opts = {}) {
  const auto a = filter_scores(
      aggregate_runs(read_score_file(a_file), opts.order), opts.method_a);
  const auto b = filter_scores(
      aggregate_runs(read_score_file(b_file), opts.order), opts.method_b);
  return pairwise(a, b, opts.metric, opts.tie_eps);
}

}  // namespace dirotq

#endif  // DIROTQ_COMMANDS_HPP_
