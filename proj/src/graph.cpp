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

#include "msf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "msf/errors.hpp"
#include "msf/kernels.hpp"
#include "msf/rng.hpp"

namespace msf {

Graph::Graph(std::size_t node_count, std::vector<Edge> edges, std::optional<Matrix> features)
    : node_count_(node_count), adjacency_(node_count), features_(std::move(features)) {
  for (auto& [u, v] : edges) {
    if (u >= node_count || v >= node_count) {
      throw ContractError("Graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                          ") out of range for " + std::to_string(node_count) + " nodes");
    }
    if (u == v) throw ContractError("Graph: self-loop at node " + std::to_string(u));
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
    throw ContractError("Graph: duplicate edge (" + std::to_string(dup->first) + "," +
                        std::to_string(dup->second) + ")");
  }
  edges_ = std::move(edges);
  for (const auto& [u, v] : edges_) {
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& list : adjacency_) std::sort(list.begin(), list.end());
  if (features_ && features_->rows() != node_count_) {
    throw ShapeError("Graph: features have " + std::to_string(features_->rows()) + " rows for " +
                     std::to_string(node_count_) + " nodes");
  }
}

std::size_t Graph::max_degree() const noexcept {
  std::size_t best = 0;
  for (const auto& list : adjacency_) best = std::max(best, list.size());
  return best;
}

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  const auto& list = adjacency_.at(u);
  return std::binary_search(list.begin(), list.end(), v);
}

Graph Graph::with_features(Matrix features) const {
  return Graph(node_count_, edges_, std::move(features));
}

Matrix adjacency_matrix(const Graph& g) {
  Matrix a(g.node_count(), g.node_count());
  for (const auto& [u, v] : g.edges()) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

Matrix degree_matrix(const Graph& g) {
  Matrix d(g.node_count(), g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) d(i, i) = static_cast<double>(g.degree(i));
  return d;
}

Matrix laplacian(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<long long> counts(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) counts[i * n + i] = static_cast<long long>(g.degree(i));
  for (const auto& [u, v] : g.edges()) {
    counts[u * n + v] -= 1;
    counts[v * n + u] -= 1;
  }
  Matrix l(n, n);
  for (std::size_t i = 0; i < n * n; ++i) l.data()[i] = static_cast<double>(counts[i]);
  return l;
}

Matrix normalized_adjacency(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
  }
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = inv_sqrt[i] * inv_sqrt[i];
  for (const auto& [u, v] : g.edges()) {
    const double w = inv_sqrt[u] * inv_sqrt[v];
    a(u, v) = w;
    a(v, u) = w;
  }
  return a;
}

NeighborSample sample_neighbors(const Graph& g, std::size_t v, std::size_t k, std::uint64_t seed) {
  if (v >= g.node_count()) throw ContractError("sample_neighbors: node out of range");
  if (k == 0) throw ContractError("sample_neighbors: k must be >= 1");
  NeighborSample out{v, {}, seed};
  const auto nbrs = g.neighbors(v);
  out.sampled.assign(nbrs.begin(), nbrs.end());
  if (k >= out.sampled.size()) return out;
  Rng rng(splitmix64(seed));
  // partial Fisher-Yates: the first k slots end up a uniform k-subset
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, out.sampled.size() - 1);
    std::swap(out.sampled[i], out.sampled[pick(rng)]);
  }
  out.sampled.resize(k);
  return out;
}

std::vector<std::size_t> knn_selection(const Matrix& similarity, std::size_t v, std::size_t k) {
  const std::size_t n = similarity.rows();
  std::vector<std::size_t> candidates;
  candidates.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != v) candidates.push_back(j);
  }
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = similarity(v, a);
    const double sb = similarity(v, b);
    return sa != sb ? sa > sb : a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    candidates.end(), better);
  candidates.resize(k);
  return candidates;
}

Graph knn_similarity_graph(const Matrix& features, std::size_t k) {
  const std::size_t n = features.rows();
  if (k == 0 || n < k + 1) {
    throw ContractError("knn_similarity_graph: need at least k+1=" + std::to_string(k + 1) +
                        " rows, got " + std::to_string(n));
  }
  const Matrix sim = kernels::parallel::cosine_similarity(features);
  std::set<Edge> edges;
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u : knn_selection(sim, v, k)) edges.insert({std::min(u, v), std::max(u, v)});
  }
  return Graph(n, std::vector<Edge>(edges.begin(), edges.end()), features);
}

Graph relabel(const Graph& g, std::span<const std::size_t> perm) {
  const std::size_t n = g.node_count();
  if (perm.size() != n) throw ShapeError("relabel: permutation length mismatch");
  std::vector<bool> seen(n, false);
  for (std::size_t p : perm) {
    if (p >= n || seen[p]) throw ContractError("relabel: not a permutation");
    seen[p] = true;
  }
  std::vector<Edge> edges;
  edges.reserve(g.edges().size());
  for (const auto& [u, v] : g.edges()) edges.emplace_back(perm[u], perm[v]);
  std::optional<Matrix> features;
  if (g.features()) {
    const Matrix& f = *g.features();
    Matrix moved(f.rows(), f.cols());
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(f.row(i).begin(), f.row(i).end(), moved.row(perm[i]).begin());
    }
    features = std::move(moved);
  }
  return Graph(n, std::move(edges), std::move(features));
}

}  // namespace msf
