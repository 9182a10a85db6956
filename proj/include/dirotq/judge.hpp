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

// Aggregation of judge scores: overall = √(SC·PQ), averaging over repeated
// runs, and pairwise win/tie/loss rates between two methods.

#ifndef DIROTQ_JUDGE_HPP_
#define DIROTQ_JUDGE_HPP_

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "dirotq/error.hpp"

namespace dirotq {

struct ScoreRecord {
  std::string image_id;
  std::string prompt_category;
  std::string method_label;
  std::string judge_label;
  double sc = 1.0;
  double pq = 1.0;
  std::size_t run_index = 0;
};

inline void check_score(double v, const char* name) {
  if (!(v >= 1.0 && v <= 10.0)) {
    throw ConfigError(std::string(name) + " score " + std::to_string(v) +
                      " outside [1, 10]");
  }
}

inline double overall_score(double sc, double pq) {
  check_score(sc, "sc");
  check_score(pq, "pq");
  return std::sqrt(sc * pq);
}

enum class AggregationOrder {
  overall_of_means,  // mean SC and PQ over runs, then √(SC·PQ)
  mean_of_overalls,  // √(SC·PQ) per run, then mean
};

struct AggregatedScore {
  std::string image_id;
  std::string prompt_category;
  std::string method_label;
  std::string judge_label;
  double sc = 0.0;
  double pq = 0.0;
  double overall = 0.0;
  std::size_t runs = 0;
};

// One entry per (image_id, method, judge), sorted by that key.
inline std::vector<AggregatedScore> aggregate_runs(
    const std::vector<ScoreRecord>& records,
    AggregationOrder order = AggregationOrder::overall_of_means) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, AggregatedScore> groups;
  for (const ScoreRecord& r : records) {
    const double overall = overall_score(r.sc, r.pq);
    AggregatedScore& g =
        groups[Key{r.image_id, r.method_label, r.judge_label}];
    if (g.runs == 0) {
      g.image_id = r.image_id;
      g.prompt_category = r.prompt_category;
      g.method_label = r.method_label;
      g.judge_label = r.judge_label;
    } else if (g.prompt_category != r.prompt_category) {
      throw FormatError("image '" + r.image_id +
                        "' listed under two prompt categories");
    }
    g.sc += r.sc;
    g.pq += r.pq;
    g.overall += overall;
    ++g.runs;
  }
  std::vector<AggregatedScore> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) {
    const double n = static_cast<double>(g.runs);
    g.sc /= n;
    g.pq /= n;
    g.overall = order == AggregationOrder::overall_of_means
                    ? std::sqrt(g.sc * g.pq)
                    : g.overall / n;
    out.push_back(g);
  }
  return out;
}

enum class JudgeMetric { sc, pq, overall };

inline double metric_value(const AggregatedScore& s, JudgeMetric m) {
  switch (m) {
    case JudgeMetric::sc:
      return s.sc;
    case JudgeMetric::pq:
      return s.pq;
    case JudgeMetric::overall:
      return s.overall;
  }
  return s.overall;
}

struct Rates {
  double win = 0.0;
  double tie = 0.0;
  double loss = 0.0;
  std::size_t n = 0;
};

struct PairwiseResult {
  double win_rate = 0.0;
  double tie_rate = 0.0;
  double loss_rate = 0.0;
  std::size_t n = 0;
  std::map<std::string, Rates> per_category;
};

namespace detail {

struct Counts {
  std::size_t win = 0, tie = 0, loss = 0;

  void add(double diff, double eps) {
    if (std::abs(diff) < eps) {
      ++tie;
    } else if (diff > 0.0) {
      ++win;
    } else {
      ++loss;
    }
  }

  Rates rates() const {
    Rates r;
    r.n = win + tie + loss;
    if (r.n == 0) return r;
    const double n = static_cast<double>(r.n);
    r.win = static_cast<double>(win) / n;
    r.loss = static_cast<double>(loss) / n;
    // Exact complement, so the three rates sum to 1.
    r.tie = 1.0 - r.win - r.loss;
    return r;
  }
};

}  // namespace detail

// Win means a scores higher than b on the chosen metric by at least
// tie_eps. Each side must hold exactly one aggregated score per image.
inline PairwiseResult pairwise(const std::vector<AggregatedScore>& a,
                               const std::vector<AggregatedScore>& b,
                               JudgeMetric metric = JudgeMetric::overall,
                               double tie_eps = 0.01) {
  if (!(tie_eps >= 0.0)) throw ConfigError("tie_eps must be non-negative");
  auto index = [](const std::vector<AggregatedScore>& v, const char* side) {
    std::map<std::string, const AggregatedScore*> m;
    for (const AggregatedScore& s : v) {
      if (!m.emplace(s.image_id, &s).second) {
        throw FormatError(std::string("side ") + side + " has image '" +
                          s.image_id +
                          "' more than once; filter to one method and judge");
      }
    }
    return m;
  };
  const auto ia = index(a, "a");
  const auto ib = index(b, "b");
  std::vector<std::string> only_a, only_b;
  for (const auto& [id, _] : ia)
    if (!ib.count(id)) only_a.push_back(id);
  for (const auto& [id, _] : ib)
    if (!ia.count(id)) only_b.push_back(id);
  if (!only_a.empty() || !only_b.empty()) {
    std::string msg = "image sets differ; only in a: [";
    for (std::size_t i = 0; i < only_a.size(); ++i)
      msg += (i ? ", " : "") + only_a[i];
    msg += "], only in b: [";
    for (std::size_t i = 0; i < only_b.size(); ++i)
      msg += (i ? ", " : "") + only_b[i];
    throw FormatError(msg + "]");
  }
  if (ia.empty()) throw ConfigError("pairwise: no images");

  detail::Counts total;
  std::map<std::string, detail::Counts> cats;
  for (const auto& [id, sa] : ia) {
    const AggregatedScore* sb = ib.at(id);
    const double diff = metric_value(*sa, metric) - metric_value(*sb, metric);
    total.add(diff, tie_eps);
    cats[sa->prompt_category].add(diff, tie_eps);
  }
  PairwiseResult out;
  const Rates t = total.rates();
  out.win_rate = t.win;
  out.tie_rate = t.tie;
  out.loss_rate = t.loss;
  out.n = t.n;
  for (const auto& [cat, c] : cats) out.per_category[cat] = c.rates();
  return out;
}

// Restricts aggregated scores to one method (and optionally one judge).
inline std::vector<AggregatedScore> filter_scores(
    const std::vector<AggregatedScore>& scores, const std::string& method,
    const std::string& judge = {}) {
  std::vector<AggregatedScore> out;
  for (const AggregatedScore& s : scores)
    if ((method.empty() || s.method_label == method) &&
        (judge.empty() || s.judge_label == judge))
      out.push_back(s);
  return out;
}

}  // namespace dirotq

#endif  // DIROTQ_JUDGE_HPP_
