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

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msf/linalg.hpp"

namespace msf {

// One-vs-rest counts for one class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

// tp / (tp + fp); UndefinedMetricError when nothing was predicted positive.
double precision(const ConfusionCounts& c);
// tp / (tp + fn); UndefinedMetricError when there are no positives.
double recall(const ConfusionCounts& c);

struct PrPoint {
  double recall;
  double precision;
};

// One point per distinct score, thresholds descending.
std::vector<PrPoint> pr_curve(std::span<const double> scores, const std::vector<bool>& positives);

// Area under the monotone precision envelope (all-points interpolation).
double average_precision(std::span<const double> scores, const std::vector<bool>& positives);

// Arithmetic mean of per-class APs.
double mean_average_precision(std::span<const double> per_class_ap);

// Undefined per-class values are left empty and skipped by the macro means.
struct MetricsReport {
  std::vector<std::string> classes;
  std::vector<ConfusionCounts> counts;
  std::vector<std::optional<double>> precision;
  std::vector<std::optional<double>> recall;
  std::vector<std::optional<double>> ap;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double map = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

// probs: n x K class scores; predictions are the row argmax.
MetricsReport evaluate(const Matrix& probs, std::span<const int> labels,
                       std::vector<std::string> class_names);

std::string to_json(const MetricsReport& report);

}  // namespace msf
