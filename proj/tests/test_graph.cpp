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
#include <set>
#include <sstream>

#include "msf/errors.hpp"
#include "msf/graph.hpp"
#include "msf/kernels.hpp"
#include "support.hpp"

using namespace msf;

namespace {

Graph path3() { return Graph(3, {{0, 1}, {1, 2}}); }

Graph complete(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) edges.emplace_back(u, v);
  }
  return Graph(n, edges);
}

}  // namespace

TEST_CASE("graph construction enforces the simple-graph invariants") {
  CHECK_THROWS_AS(Graph(2, {{0, 2}}), ContractError);
  CHECK_THROWS_AS(Graph(2, {{1, 1}}), ContractError);
  CHECK_THROWS_AS(Graph(3, {{0, 1}, {1, 0}}), ContractError);
  CHECK_THROWS_AS(Graph(3, {}, Matrix(2, 4)), ShapeError);
  const Graph g(3, {{2, 0}});
  CHECK(g.edges() == std::vector<Edge>{{0, 2}});
  CHECK(g.has_edge(2, 0));
  CHECK_FALSE(g.has_edge(1, 0));
}

TEST_CASE("degree matrix examples") {
  CHECK(degree_matrix(Graph(3)) == Matrix(3, 3));
  CHECK(degree_matrix(path3()) == Matrix{{1, 0, 0}, {0, 2, 0}, {0, 0, 1}});
  Matrix d4(4, 4);
  for (int i = 0; i < 4; ++i) d4(i, i) = 3;
  CHECK(degree_matrix(complete(4)) == d4);
}

TEST_CASE("laplacian examples") {
  CHECK(laplacian(path3()) == Matrix{{1, -1, 0}, {-1, 2, -1}, {0, -1, 1}});
  CHECK(laplacian(Graph(1)) == Matrix{{0}});
}

TEST_CASE("laplacian of random graphs is PSD with zero row sums") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Graph g = test::random_graph(10, 0.3, rng);
    const Matrix L = laplacian(g);
    for (std::size_t r = 0; r < 10; ++r) {
      double s = 0.0;
      for (double v : L.row(r)) s += v;
      CHECK(s == 0.0);
    }
    CHECK(symmetric_eigen(L).eigenvalues.front() >= -1e-10);
  }
}

TEST_CASE("normalized adjacency examples") {
  const Matrix two = normalized_adjacency(Graph(2, {{0, 1}}));
  for (double v : two.data()) CHECK(std::abs(v - 0.5) <= 1e-15);
  CHECK(normalized_adjacency(Graph(1)) == Matrix{{1}});
  Rng rng(9);
  const Matrix a = normalized_adjacency(test::random_graph(12, 0.25, rng));
  CHECK(a == transpose(a));
  for (double v : a.data()) CHECK(v >= 0.0);
  for (double l : symmetric_eigen(a).eigenvalues) {
    CHECK(l >= -1.0 - 1e-10);
    CHECK(l <= 1.0 + 1e-10);
  }
}

TEST_CASE("sample_neighbors takes everything when k exceeds the degree") {
  const Graph g(4, {{0, 1}, {0, 2}, {0, 3}});
  const NeighborSample s = sample_neighbors(g, 0, 5, 11);
  CHECK(std::set<std::size_t>(s.sampled.begin(), s.sampled.end()) ==
        std::set<std::size_t>{1, 2, 3});
  CHECK(s.center == 0);
  CHECK(sample_neighbors(Graph(2), 1, 3, 0).sampled.empty());
}

TEST_CASE("sample_neighbors is deterministic per seed and samples true neighbours") {
  std::vector<Edge> edges;
  for (std::size_t v = 1; v <= 10; ++v) edges.emplace_back(0, v);
  const Graph g(11, edges);
  const NeighborSample a = sample_neighbors(g, 0, 4, 1234);
  const NeighborSample b = sample_neighbors(g, 0, 4, 1234);
  CHECK(a.sampled == b.sampled);
  CHECK(a.sampled.size() == 4);
  CHECK(std::set<std::size_t>(a.sampled.begin(), a.sampled.end()).size() == 4);
  for (auto u : a.sampled) CHECK(g.has_edge(0, u));
}

TEST_CASE("sample_neighbors is uniform") {
  const Graph g(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  const int trials = 10000;
  std::vector<int> counts(5, 0);
  for (int t = 0; t < trials; ++t) ++counts[sample_neighbors(g, 0, 1, t).sampled.at(0)];
  const double sigma = std::sqrt(0.25 * 0.75 / trials);
  for (int v = 1; v <= 4; ++v) {
    CHECK(std::abs(counts[v] / static_cast<double>(trials) - 0.25) <= 3 * sigma);
  }
}

TEST_CASE("knn graph of one-hot rows follows the tie-break rule") {
  const Matrix x{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const Graph g = knn_similarity_graph(x, 1);
  // 0 -> 1, 1 -> 0, 2 -> 0.
  CHECK(g.edges() == std::vector<Edge>{{0, 1}, {0, 2}});
  CHECK(g.features().has_value());
  CHECK(*g.features() == x);
}

TEST_CASE("knn graph keeps two separated clusters apart") {
  Rng rng(4);
  Matrix x(10, 3);
  std::normal_distribution<double> n(0.0, 0.05);
  for (std::size_t i = 0; i < 10; ++i) {
    x(i, 0) = (i < 5 ? 1.0 : 0.0) + n(rng);
    x(i, 1) = (i < 5 ? 0.0 : 1.0) + n(rng);
    x(i, 2) = n(rng);
  }
  const Graph g = knn_similarity_graph(x, 1);
  for (auto [u, v] : g.edges()) CHECK((u < 5) == (v < 5));
  // Brute force: every node's best cosine partner is an edge.
  for (std::size_t i = 0; i < 10; ++i) {
    std::size_t best = 0;
    double best_s = -2.0;
    for (std::size_t j = 0; j < 10; ++j) {
      if (j == i) continue;
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        dot += x(i, c) * x(j, c);
        ni += x(i, c) * x(i, c);
        nj += x(j, c) * x(j, c);
      }
      const double s = dot / std::sqrt(ni * nj);
      if (s > best_s) {
        best_s = s;
        best = j;
      }
    }
    CHECK(g.has_edge(i, best));
  }
}

TEST_CASE("knn graph with k = n - 1 is complete") {
  Rng rng(5);
  const Graph g = knn_similarity_graph(test::random_matrix(6, 4, rng), 5);
  CHECK(g.edges().size() == 15);
}

TEST_CASE("knn graph rejects zero rows and too few nodes") {
  try {
    knn_similarity_graph(Matrix{{1, 0}, {0, 0}, {1, 1}}, 1);
    FAIL("expected DegenerateFeatureError");
  } catch (const DegenerateFeatureError& e) {
    CHECK(e.row() == 1);
  }
  CHECK_THROWS(knn_similarity_graph(Matrix{{1, 0}, {0, 1}}, 2));
}

TEST_CASE("knn selection makes exactly k picks per node") {
  Rng rng(6);
  const Matrix x = test::random_matrix(9, 3, rng);
  const Graph g = knn_similarity_graph(x, 3);
  const Matrix sim = kernels::serial::cosine_similarity(x);
  for (std::size_t v = 0; v < 9; ++v) {
    const auto picks = knn_selection(sim, v, 3);
    CHECK(picks.size() == 3);
    for (auto u : picks) CHECK(g.has_edge(v, u));
  }
  for (std::size_t v = 0; v < 9; ++v) CHECK(g.degree(v) >= 3);
}

TEST_CASE("relabel moves edges and features together") {
  const Graph g(3, {{0, 1}}, Matrix{{1}, {2}, {3}});
  const Graph r = relabel(g, std::vector<std::size_t>{2, 0, 1});
  CHECK(r.edges() == std::vector<Edge>{{0, 2}});
  CHECK(*r.features() == Matrix{{2}, {3}, {1}});
}

TEST_CASE("edge list round trip and the node-count directive") {
  const Graph g(5, {{0, 1}, {2, 3}});
  std::stringstream ss;
  write_edge_list(ss, g);
  const Graph back = read_edge_list(ss);
  CHECK(back.node_count() == 5);
  CHECK(back.edges() == g.edges());
  std::istringstream plain("# comment\n0 1\n1   2\n\n");
  const Graph p = read_edge_list(plain);
  CHECK(p.node_count() == 3);
  CHECK(p.edges().size() == 2);
  std::istringstream bad("0 x\n");
  CHECK_THROWS(read_edge_list(bad));
}
