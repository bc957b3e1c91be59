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

#include "msf/rng.hpp"

#include <cmath>

namespace msf {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_matrix(rows, cols, -limit, limit, rng);
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

}  // namespace msf
