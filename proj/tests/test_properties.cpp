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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "msf/graph.hpp"
#include "properties.hpp"

using namespace msf;

TEST_CASE("every registered property holds") {
  for (const auto& name : test::property_names()) {
    const auto r = test::run_property(name);
    INFO(test::describe(r));
    CHECK(r.passed());
  }
}

TEST_CASE("property runs are reproducible per seed") {
  test::PropertyOptions opts;
  opts.trials = 5;
  const auto a = test::run_property("gcn_permutation_equivariance", opts);
  const auto b = test::run_property("gcn_permutation_equivariance", opts);
  CHECK(a.worst == b.worst);
}

TEST_CASE("an unknown property name is rejected") {
  CHECK_THROWS_AS(test::run_property("no_such_property"), std::out_of_range);
}

TEST_CASE("the max-entry bound does not hold for renormalized propagation") {
  // Hub of a 10-star: its row of A_norm sums to 1/10 + 9/sqrt(20) > 2, so
  // only the Frobenius bound is a property.
  std::vector<Edge> edges;
  for (std::size_t leaf = 1; leaf < 10; ++leaf) edges.emplace_back(0, leaf);
  const Matrix a = normalized_adjacency(Graph(10, edges));
  const Matrix out = matmul(a, Matrix(10, 1, 1.0));
  CHECK(out(0, 0) == doctest::Approx(0.1 + 9.0 / std::sqrt(20.0)).epsilon(1e-12));
  CHECK(max_abs(out) > 2.0);
}
