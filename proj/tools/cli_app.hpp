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

// Argument parsing for the dirotq tool. Kept in a header so tests can drive
// run_cli() in-process.
//
// Config precedence: flags > DIRQ_SEED > --config file > built-in defaults.
// Exit codes: 0 success, 1 usage/config/format error, 2 numerical failure.

#ifndef DIROTQ_TOOLS_CLI_APP_HPP_
#define DIROTQ_TOOLS_CLI_APP_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dirotq/commands.hpp"
#include "dirotq/error.hpp"
#include "dirotq/json_io.hpp"

namespace dirotq::cli {

struct RunFlags {
  std::string config_file;
  std::optional<double> r;
  std::optional<std::uint64_t> r_seed;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> calib_samples;
  std::optional<std::size_t> timesteps;
  std::optional<std::size_t> layers;
  std::optional<std::string> output_dir;
  bool no_gptq = false;
  std::string data_dir;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "JSON run config");
    app->add_option("--r", r, "fraction of PCA directions kept unquantized");
    app->add_option("--r-seed", r_seed, "seed of the residual rotation");
    app->add_option("--seed", seed, "synthetic data seed");
    app->add_option("--calib-samples", calib_samples, "calibration samples");
    app->add_option("--timesteps", timesteps, "timesteps per sample");
    app->add_option("--layers", layers, "number of synthetic layers");
    app->add_option("-o,--output-dir", output_dir, "artifact directory");
    app->add_flag("--no-gptq", no_gptq, "round-to-nearest residual weights");
    app->add_option("--data", data_dir,
                    "layer data directory instead of synthetic layers");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg = load_run_config(config_file);
    apply_seed_env(cfg);
    if (r) cfg.r = *r;
    if (r_seed) cfg.r_seed = *r_seed;
    if (seed) cfg.synth.seed = *seed;
    if (calib_samples) cfg.calib_samples = *calib_samples;
    if (timesteps) cfg.timesteps = *timesteps;
    if (layers) cfg.layers = *layers;
    if (output_dir) cfg.output_dir = *output_dir;
    if (no_gptq) cfg.gptq_enabled = false;
    return cfg;
  }

  std::optional<std::filesystem::path> data() const {
    if (data_dir.empty()) return std::nullopt;
    return std::filesystem::path(data_dir);
  }
};

inline JudgeMetric parse_metric(const std::string& s) {
  if (s == "sc") return JudgeMetric::sc;
  if (s == "pq") return JudgeMetric::pq;
  if (s == "overall") return JudgeMetric::overall;
  throw ConfigError("unknown metric '" + s + "' (expected sc, pq or overall)");
}

inline AggregationOrder parse_order(const std::string& s) {
  if (s == "overall-of-means") return AggregationOrder::overall_of_means;
  if (s == "mean-of-overalls") return AggregationOrder::mean_of_overalls;
  throw ConfigError("unknown order '" + s +
                    "' (expected overall-of-means or mean-of-overalls)");
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"DiRotQ post-training quantization workbench", "dirotq"};
  app.require_subcommand(1);

  RunFlags cal_flags, quant_flags, eval_flags, sweep_flags;
  auto* cal = app.add_subcommand("calibrate", "accumulate statistics, fit PCA");
  cal_flags.attach(cal);

  auto* quant = app.add_subcommand("quantize", "rotate, fuse and quantize");
  quant_flags.attach(quant);
  std::string basis_dir;
  quant->add_option("--basis-dir", basis_dir,
                    "calibration output (default <output-dir>/calib)");

  auto* eval = app.add_subcommand("eval", "QSNR reports for fused layers");
  eval_flags.attach(eval);
  std::string fused_path;
  std::string sweep_spec;
  eval->add_option("--fused-dir", fused_path,
                   "quantize output (default <output-dir>/fused)");
  eval->add_option("--sweep-r", sweep_spec, "r sweep as start:stop:step");

  auto* sweep = app.add_subcommand("sweep", "r sweep from scratch");
  sweep_flags.attach(sweep);
  std::string sweep_values = "0.05:0.25:0.05";
  sweep->add_option("--r-values", sweep_values, "start:stop:step");

  auto* judge = app.add_subcommand("judge", "pairwise judge-score comparison");
  std::string a_file, b_file, out_file, metric = "overall",
                                         order = "overall-of-means";
  JudgeOptions jopts;
  judge->add_option("a", a_file, "scores of method A (JSON lines)")->required();
  judge->add_option("b", b_file, "scores of method B (JSON lines)")->required();
  judge->add_option("--tie-eps", jopts.tie_eps, "tie threshold (strict)");
  judge->add_option("--metric", metric, "sc, pq or overall");
  judge->add_option("--order", order,
                    "overall-of-means (default) or mean-of-overalls");
  judge->add_option("--method-a", jopts.method_a, "keep only this method in a");
  judge->add_option("--method-b", jopts.method_b, "keep only this method in b");
  judge->add_option("--out", out_file, "write the result here, not stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    Json result;
    if (cal->parsed()) {
      result = cmd_calibrate(cal_flags.resolve(), cal_flags.data());
    } else if (quant->parsed()) {
      std::optional<std::filesystem::path> b;
      if (!basis_dir.empty()) b = basis_dir;
      result = cmd_quantize(quant_flags.resolve(), b, quant_flags.data());
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> f;
      if (!fused_path.empty()) f = fused_path;
      std::vector<double> rs;
      if (!sweep_spec.empty()) rs = parse_range(sweep_spec);
      result = cmd_eval(eval_flags.resolve(), f, eval_flags.data(), rs);
    } else if (sweep->parsed()) {
      result = cmd_sweep(sweep_flags.resolve(), parse_range(sweep_values),
                         sweep_flags.data());
    } else if (judge->parsed()) {
      jopts.metric = parse_metric(metric);
      jopts.order = parse_order(order);
      result = to_json(cmd_judge(a_file, b_file, jopts));
      if (!out_file.empty()) {
        write_json(out_file, result);
        return 0;
      }
    }
    out << result.dump(2) << '\n';
    return 0;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace dirotq::cli

#endif  // DIROTQ_TOOLS_CLI_APP_HPP_
