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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "msf/linalg.hpp"

namespace msf {

using Edge = std::pair<std::size_t, std::size_t>;

// Undirected simple graph. Edges are stored once as (min, max); self-loops
// are never stored (normalization adds them).
class Graph {
 public:
  Graph() = default;
  // Throws ContractError on out-of-range endpoints, self-loops or duplicate
  // edges (in either orientation), ShapeError on a feature row-count mismatch.
  explicit Graph(std::size_t node_count, std::vector<Edge> edges = {},
                 std::optional<Matrix> features = std::nullopt);

  std::size_t node_count() const noexcept { return node_count_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::span<const std::size_t> neighbors(std::size_t v) const { return adjacency_.at(v); }
  std::size_t degree(std::size_t v) const { return adjacency_.at(v).size(); }
  std::size_t max_degree() const noexcept;
  bool has_edge(std::size_t u, std::size_t v) const;

  const std::optional<Matrix>& features() const noexcept { return features_; }
  Graph with_features(Matrix features) const;

 private:
  std::size_t node_count_ = 0;
  std::vector<Edge> edges_;                          // sorted
  std::vector<std::vector<std::size_t>> adjacency_;  // sorted neighbour lists
  std::optional<Matrix> features_;
};

struct NeighborSample {
  std::size_t center = 0;
  std::vector<std::size_t> sampled;
  std::uint64_t seed = 0;
};

Matrix adjacency_matrix(const Graph& g);
Matrix degree_matrix(const Graph& g);
// L = D - A.
Matrix laplacian(const Graph& g);
// D~^-1/2 (A + I) D~^-1/2 with D~ the degree matrix of A + I.
Matrix normalized_adjacency(const Graph& g);

// Uniform sample of min(k, deg(v)) distinct neighbours; empty for isolated v.
NeighborSample sample_neighbors(const Graph& g, std::size_t v, std::size_t k, std::uint64_t seed);

// Each node links to its k most cosine-similar other nodes (ties to the lower
// index), then edges are union-symmetrized. The result carries `features`.
Graph knn_similarity_graph(const Matrix& features, std::size_t k);

// The k selections made for node v before symmetrization.
std::vector<std::size_t> knn_selection(const Matrix& similarity, std::size_t v, std::size_t k);

// Node i of `g` becomes node perm[i]; features are permuted to match.
Graph relabel(const Graph& g, std::span<const std::size_t> perm);

// Edge list: "u v" per line, 0-based, '#' comments. A "# nodes N" comment
// fixes the node count (otherwise max index + 1).
Graph read_edge_list(std::istream& in);
Graph read_edge_list(const std::filesystem::path& path);
void write_edge_list(std::ostream& out, const Graph& g);

// One row per line, comma-separated.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(std::ostream& out, const Matrix& m);

}  // namespace msf
