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


// Shared fixtures for the test binaries. Each binary defines its own main via
// doctest; nothing here depends on doctest.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "msf/graph.hpp"
#include "msf/layers.hpp"
#include "msf/linalg.hpp"
#include "msf/rng.hpp"

namespace msf::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  return uniform_matrix(rows, cols, lo, hi, rng);
}

inline Matrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix a = random_matrix(n, n, rng);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  }
  return s;
}

inline FeatureMap random_feature_map(std::size_t c, std::size_t h, std::size_t w, Rng& rng,
                                     double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  FeatureMap f(c, h, w);
  for (double& v : f.data) v = u(rng);
  return f;
}

// Naive i-j-k product, the reference every matmul variant is held to.
inline Matrix triple_loop(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

// Erdos-Renyi G(n, p).
inline Graph random_graph(std::size_t n, double p, Rng& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (coin(rng)) edges.emplace_back(u, v);
    }
  }
  return Graph(n, std::move(edges));
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

// Row i of m lands on row perm[i].
inline Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(perm[i], j) = m(i, j);
  }
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

}  // namespace msf::test
