// Copyright 2026 The MSF-CNN Authors.
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

#include "msf/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "msf/errors.hpp"

namespace msf {

double precision(const ConfusionCounts& c) {
  if (c.tp + c.fp == 0) throw UndefinedMetricError("precision undefined: tp + fp = 0");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) throw UndefinedMetricError("recall undefined: tp + fn = 0");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, const std::vector<bool>& positives) {
  if (scores.size() != positives.size()) {
    throw ShapeError("pr_curve: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(positives.size()) + " labels");
  }
  const auto total = static_cast<std::size_t>(std::count(positives.begin(), positives.end(), true));
  if (total == 0) throw UndefinedMetricError("average precision undefined: no positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<PrPoint> curve;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (positives[order[i]]) ++tp;
    const bool group_end = i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]];
    if (group_end) {
      curve.push_back({static_cast<double>(tp) / static_cast<double>(total),
                       static_cast<double>(tp) / static_cast<double>(i + 1)});
    }
  }
  return curve;
}

double average_precision(std::span<const double> scores, const std::vector<bool>& positives) {
  const auto curve = pr_curve(scores, positives);
  std::vector<double> envelope(curve.size());
  double best = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    best = std::max(best, curve[i].precision);
    envelope[i] = best;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    ap += (curve[i].recall - prev_recall) * envelope[i];
    prev_recall = curve[i].recall;
  }
  return ap;
}

double mean_average_precision(std::span<const double> per_class_ap) {
  if (per_class_ap.empty()) throw UndefinedMetricError("mAP undefined: no classes");
  // Running mean: identical inputs come back bit-exact.
  double mean = 0.0;
  for (std::size_t i = 0; i < per_class_ap.size(); ++i) {
    mean += (per_class_ap[i] - mean) / static_cast<double>(i + 1);
  }
  return mean;
}

namespace {

template <class F>
std::optional<double> defined_or_empty(F&& f) {
  try {
    return f();
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

double mean_of_defined(const std::vector<std::optional<double>>& values) {
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v) defined.push_back(*v);
  }
  return defined.empty() ? 0.0 : mean_average_precision(defined);
}

}  // namespace

MetricsReport evaluate(const Matrix& probs, std::span<const int> labels,
                       std::vector<std::string> class_names) {
  const std::size_t k = probs.cols();
  if (probs.rows() != labels.size()) throw ShapeError("evaluate: label count mismatch");
  if (class_names.size() != k) throw ShapeError("evaluate: class name count mismatch");
  MetricsReport r;
  r.classes = std::move(class_names);
  r.n = labels.size();
  r.counts.assign(k, {});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const auto truth = static_cast<std::size_t>(labels[i]);
    if (truth >= k) throw ContractError("evaluate: label " + std::to_string(labels[i]) + " >= K");
    if (pred == truth) ++correct;
    for (std::size_t c = 0; c < k; ++c) {
      const bool p = pred == c;
      const bool t = truth == c;
      auto& cc = r.counts[c];
      if (p && t) ++cc.tp;
      else if (p) ++cc.fp;
      else if (t) ++cc.fn;
      else ++cc.tn;
    }
  }
  r.accuracy = r.n ? static_cast<double>(correct) / static_cast<double>(r.n) : 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    r.precision.push_back(defined_or_empty([&] { return msf::precision(r.counts[c]); }));
    r.recall.push_back(defined_or_empty([&] { return msf::recall(r.counts[c]); }));
    std::vector<double> scores(probs.rows());
    std::vector<bool> positives(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      scores[i] = probs(i, c);
      positives[i] = static_cast<std::size_t>(labels[i]) == c;
    }
    r.ap.push_back(defined_or_empty([&] { return average_precision(scores, positives); }));
  }
  r.macro_precision = mean_of_defined(r.precision);
  r.macro_recall = mean_of_defined(r.recall);
  r.map = mean_of_defined(r.ap);
  return r;
}

std::string to_json(const MetricsReport& r) {
  auto opt_array = [](const std::vector<std::optional<double>>& values) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& v : values) a.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    return a;
  };
  nlohmann::json j;
  j["classes"] = r.classes;
  j["precision"] = opt_array(r.precision);
  j["recall"] = opt_array(r.recall);
  j["ap"] = opt_array(r.ap);
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["map"] = r.map;
  j["accuracy"] = r.accuracy;
  j["n"] = r.n;
  return j.dump();
}

}  // namespace msf
