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


// Brute-force references, written independently of the library code they
// check: no shared sorting, no incremental counters.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace msf::test {

// Every distinct score is a threshold; precision and recall at a threshold are
// counted from scratch, then the envelope is taken over all points with at
// least that recall.
inline double brute_force_ap(std::span<const double> scores, const std::vector<bool>& positives) {
  std::vector<double> thresholds(scores.begin(), scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double total_pos = 0;
  for (bool p : positives) total_pos += p;
  std::vector<double> rec, prec;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (positives[i] ? tp : fp) += 1;
    }
    rec.push_back(tp / total_pos);
    prec.push_back(tp / (tp + fp));
  }
  double ap = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    double env = 0.0;
    for (std::size_t j = 0; j < rec.size(); ++j) {
      if (rec[j] >= rec[i]) env = std::max(env, prec[j]);
    }
    ap += (rec[i] - (i ? rec[i - 1] : 0.0)) * env;
  }
  return ap;
}

// Median of the clamped window around (y, x) by full sort.
inline double brute_force_median(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 std::size_t y, std::size_t x, std::size_t window) {
  const long r = static_cast<long>(window / 2);
  std::vector<double> vals;
  for (long dy = -r; dy <= r; ++dy) {
    for (long dx = -r; dx <= r; ++dx) {
      const long yy = std::clamp(static_cast<long>(y) + dy, 0L, static_cast<long>(h) - 1);
      const long xx = std::clamp(static_cast<long>(x) + dx, 0L, static_cast<long>(w) - 1);
      vals.push_back(plane[yy * w + xx]);
    }
  }
  std::sort(vals.begin(), vals.end());
  return vals[vals.size() / 2];
}

}  // namespace msf::test
