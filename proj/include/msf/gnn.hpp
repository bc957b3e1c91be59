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
#include <span>
#include <vector>

#include "msf/graph.hpp"
#include "msf/layers.hpp"

namespace msf {

// act(A_norm H W), A_norm the renormalized adjacency. Params: W (in x out).
struct GcnLayer {
  LayerParams params;
  Activation activation = Activation::kRelu;
};

GcnLayer make_gcn_layer(std::size_t in, std::size_t out, Activation activation, Rng& rng);

Matrix gcn_forward(const GcnLayer& layer, const Graph& g, const Matrix& h);
BackwardResult gcn_backward(const GcnLayer& layer, const Graph& g, const Matrix& h,
                            const Matrix& grad_out);
// Same, with normalized_adjacency(g) already computed.
Matrix gcn_forward(const GcnLayer& layer, const Matrix& a_norm, const Matrix& h);
BackwardResult gcn_backward(const GcnLayer& layer, const Matrix& a_norm, const Matrix& h,
                            const Matrix& grad_out);

// act(X theta_self + A H_prev theta_nbr) with the unnormalized adjacency A.
// Params: theta_self (in x out), theta_nbr (prev x out).
struct Nn4gLayer {
  LayerParams params;
  Activation activation = Activation::kRelu;
};

Nn4gLayer make_nn4g_layer(std::size_t in, std::size_t prev, std::size_t out, Activation activation,
                          Rng& rng);

Matrix nn4g_forward(const Nn4gLayer& layer, const Graph& g, const Matrix& x, const Matrix& h_prev);
// input_grads = {dx, dh_prev}.
BackwardResult nn4g_backward(const Nn4gLayer& layer, const Graph& g, const Matrix& x,
                             const Matrix& h_prev, const Matrix& grad_out);

enum class Aggregator { kMean, kPooling };

// act([h_v, agg(sampled neighbours of v)] W). Params: W ((in + agg) x out);
// the pooling aggregator adds W_pool (in x in) and b_pool (1 x in) and takes
// an elementwise max of relu(h_u W_pool + b_pool).
struct GraphSageLayer {
  LayerParams params;
  Aggregator aggregator = Aggregator::kMean;
  std::size_t sample_size = 10;
  std::uint64_t seed = 0;
  Activation activation = Activation::kRelu;
};

GraphSageLayer make_graphsage_layer(std::size_t in, std::size_t out, Aggregator aggregator,
                                    std::size_t sample_size, std::uint64_t seed,
                                    Activation activation, Rng& rng);

// Per-node samples for one (seed, epoch); node v uses derive_seed(seed, epoch, v).
std::vector<NeighborSample> graphsage_samples(const GraphSageLayer& layer, const Graph& g,
                                              std::size_t epoch);
// 1 x agg_dim aggregate of the given neighbour rows (zeros when empty).
Matrix aggregate_neighbors(const GraphSageLayer& layer, const Matrix& h,
                           std::span<const std::size_t> neighbors);

Matrix graphsage_forward(const GraphSageLayer& layer, const Graph& g, const Matrix& h,
                         std::size_t epoch = 0);
BackwardResult graphsage_backward(const GraphSageLayer& layer, const Graph& g, const Matrix& h,
                                  const Matrix& grad_out, std::size_t epoch = 0);

}  // namespace msf
