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

#include "msf/audit.hpp"
#include "msf/errors.hpp"
#include "msf/gnn.hpp"
#include "support.hpp"

using namespace msf;

TEST_CASE("gcn on one edge averages the two rows") {
  GcnLayer layer{{{"W", Matrix::identity(2)}}, Activation::kIdentity};
  const Graph g(2, {{0, 1}});
  const Matrix y = gcn_forward(layer, g, Matrix{{2, 0}, {0, 2}});
  for (double v : y.data()) CHECK(std::abs(v - 1.0) <= 1e-15);
}

TEST_CASE("gcn on an isolated node is the identity") {
  GcnLayer layer{{{"W", Matrix::identity(3)}}, Activation::kIdentity};
  const Matrix x{{1, -2, 3}};
  CHECK(gcn_forward(layer, Graph(1), x) == x);
}

TEST_CASE("gcn rejects a row-count mismatch") {
  Rng rng(0);
  const GcnLayer layer = make_gcn_layer(2, 2, Activation::kRelu, rng);
  CHECK_THROWS_AS(gcn_forward(layer, Graph(3), Matrix(2, 2)), ShapeError);
}

TEST_CASE("gcn both association orders agree") {
  Rng rng(1);
  const Graph g = test::random_graph(9, 0.4, rng);
  const Matrix a = normalized_adjacency(g);
  for (auto [in, out] : {std::pair{3, 7}, std::pair{7, 3}}) {
    const GcnLayer layer = make_gcn_layer(in, out, Activation::kIdentity, rng);
    const Matrix h = test::random_matrix(9, in, rng);
    const Matrix expected = test::triple_loop(test::triple_loop(a, h), layer.params.at("W"));
    CHECK(test::max_abs_diff(gcn_forward(layer, g, h), expected) <= 1e-12);
  }
}

TEST_CASE("nn4g with zero previous state ignores the edges") {
  Rng rng(2);
  const Nn4gLayer layer = make_nn4g_layer(3, 2, 4, Activation::kRelu, rng);
  const Matrix x = test::random_matrix(5, 3, rng);
  const Matrix with_edges = nn4g_forward(layer, test::random_graph(5, 0.8, rng), x, Matrix(5, 2));
  const Matrix without = nn4g_forward(layer, Graph(5), x, Matrix(5, 2));
  CHECK(with_edges == without);
  CHECK(with_edges == relu_forward(matmul(x, layer.params.at("theta_self"))));
}

TEST_CASE("nn4g sums neighbours without normalization") {
  Nn4gLayer layer{{{"theta_self", Matrix{{0}}}, {"theta_nbr", Matrix{{1}}}}, Activation::kIdentity};
  const Graph star(4, {{0, 1}, {0, 2}, {0, 3}});
  const Matrix y = nn4g_forward(layer, star, Matrix(4, 1), Matrix(4, 1, 1.0));
  CHECK(y(0, 0) == 3.0);
  CHECK(y(1, 0) == 1.0);
}

TEST_CASE("graphsage mean over one neighbour is that neighbour") {
  GraphSageLayer layer;
  layer.aggregator = Aggregator::kMean;
  const Matrix h{{1, 2}, {3, 4}, {5, 6}};
  const std::size_t nb[] = {2};
  CHECK(aggregate_neighbors(layer, h, nb) == Matrix{{5, 6}});
  CHECK(aggregate_neighbors(layer, h, {}) == Matrix(1, 2));
}

TEST_CASE("graphsage aggregators ignore neighbour order") {
  Rng rng(3);
  for (Aggregator agg : {Aggregator::kMean, Aggregator::kPooling}) {
    const GraphSageLayer layer = make_graphsage_layer(4, 3, agg, 8, 5, Activation::kRelu, rng);
    const Matrix h = test::random_matrix(6, 4, rng);
    std::vector<std::size_t> nb{0, 2, 3, 5};
    const Matrix a = aggregate_neighbors(layer, h, nb);
    std::reverse(nb.begin(), nb.end());
    std::swap(nb[0], nb[2]);
    CHECK(aggregate_neighbors(layer, h, nb) == a);
  }
}

TEST_CASE("graphsage weight shape and zero-degree nodes") {
  Rng rng(4);
  const GraphSageLayer mean = make_graphsage_layer(4, 3, Aggregator::kMean, 2, 0, Activation::kIdentity, rng);
  CHECK(mean.params.at("W").rows() == 8);
  const GraphSageLayer pool = make_graphsage_layer(4, 3, Aggregator::kPooling, 2, 0, Activation::kIdentity, rng);
  CHECK(pool.params.at("W_pool").rows() == 4);
  CHECK(pool.params.at("b_pool").cols() == 4);
  const Matrix h = test::random_matrix(2, 4, rng);
  const Matrix y = graphsage_forward(mean, Graph(2), h);
  // Isolated: concat(h_v, 0) W uses only the top half of W.
  Matrix top(4, 3);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 3; ++c) top(r, c) = mean.params.at("W")(r, c);
  }
  CHECK(test::max_abs_diff(y, matmul(h, top)) <= 1e-15);
}

TEST_CASE("graphsage samples are fixed per epoch and vary across epochs") {
  Rng rng(5);
  std::vector<Edge> edges;
  for (std::size_t v = 1; v < 12; ++v) edges.emplace_back(0, v);
  const Graph g(12, edges);
  const GraphSageLayer layer = make_graphsage_layer(2, 2, Aggregator::kMean, 3, 99, Activation::kRelu, rng);
  const auto a = graphsage_samples(layer, g, 4);
  const auto b = graphsage_samples(layer, g, 4);
  CHECK(a[0].sampled == b[0].sampled);
  CHECK(a[0].sampled.size() == 3);
  bool differs = false;
  for (std::size_t e = 5; e < 15 && !differs; ++e) {
    differs = graphsage_samples(layer, g, e)[0].sampled != a[0].sampled;
  }
  CHECK(differs);
}

TEST_CASE("gnn layers pass the finite-difference check on five seeds") {
  for (const std::string name : {"gcn", "nn4g", "graphsage_mean", "graphsage_pooling"}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CAPTURE(name);
      CAPTURE(seed);
      CHECK(grad_check(audit_case(name, seed)).max_rel_error <= kLayerGradTolerance);
    }
  }
}
