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

#include "msf/gnn.hpp"

#include <algorithm>
#include <string>

#include "msf/errors.hpp"

namespace msf {

namespace {

void require_rows(const Matrix& m, std::size_t n, const char* what) {
  if (m.rows() != n) {
    throw ShapeError(std::string(what) + ": " + std::to_string(m.rows()) + " rows for " +
                     std::to_string(n) + " nodes");
  }
}

}  // namespace

// ---- GCN --------------------------------------------------------------------

GcnLayer make_gcn_layer(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  return {{{"W", glorot_uniform(in, out, in, out, rng)}}, activation};
}

namespace {

// A_norm h W, associated so the n x n product runs over the narrower side.
Matrix propagate(const Matrix& a_norm, const Matrix& h, const Matrix& w) {
  return w.cols() < w.rows() ? matmul(a_norm, matmul(h, w)) : matmul(matmul(a_norm, h), w);
}

}  // namespace

Matrix gcn_forward(const GcnLayer& layer, const Matrix& a_norm, const Matrix& h) {
  require_rows(h, a_norm.rows(), "gcn");
  return activation_forward(layer.activation, propagate(a_norm, h, layer.params.at("W")));
}

BackwardResult gcn_backward(const GcnLayer& layer, const Matrix& a_norm, const Matrix& h,
                            const Matrix& grad_out) {
  require_rows(h, a_norm.rows(), "gcn_backward");
  const Matrix& w = layer.params.at("W");
  const Matrix d_pre = activation_backward(layer.activation, propagate(a_norm, h, w), grad_out);
  // A_norm is symmetric, so A_norm^T d = A_norm d
  Matrix d_h;
  Matrix d_w;
  if (w.cols() < w.rows()) {
    const Matrix ad = matmul(a_norm, d_pre);
    d_h = matmul_nt(ad, w);
    d_w = matmul_tn(h, ad);
  } else {
    d_h = matmul(a_norm, matmul_nt(d_pre, w));
    d_w = matmul_tn(matmul(a_norm, h), d_pre);
  }
  const Matrix inputs[] = {h};
  return BackwardResult({d_h}, {{"W", d_w}}, inputs, layer.params);
}

Matrix gcn_forward(const GcnLayer& layer, const Graph& g, const Matrix& h) {
  require_rows(h, g.node_count(), "gcn");
  return gcn_forward(layer, normalized_adjacency(g), h);
}

BackwardResult gcn_backward(const GcnLayer& layer, const Graph& g, const Matrix& h,
                            const Matrix& grad_out) {
  require_rows(h, g.node_count(), "gcn_backward");
  return gcn_backward(layer, normalized_adjacency(g), h, grad_out);
}

// ---- NN4G -------------------------------------------------------------------

Nn4gLayer make_nn4g_layer(std::size_t in, std::size_t prev, std::size_t out, Activation activation,
                          Rng& rng) {
  return {{{"theta_self", glorot_uniform(in, out, in, out, rng)},
           {"theta_nbr", glorot_uniform(prev, out, prev, out, rng)}},
          activation};
}

namespace {

void check_nn4g(const Nn4gLayer& layer, const Graph& g, const Matrix& x, const Matrix& h_prev) {
  require_rows(x, g.node_count(), "nn4g x");
  require_rows(h_prev, g.node_count(), "nn4g h_prev");
  if (x.cols() != layer.params.at("theta_self").rows() ||
      h_prev.cols() != layer.params.at("theta_nbr").rows()) {
    throw ShapeError("nn4g: feature widths do not match theta shapes");
  }
}

}  // namespace

Matrix nn4g_forward(const Nn4gLayer& layer, const Graph& g, const Matrix& x, const Matrix& h_prev) {
  check_nn4g(layer, g, x, h_prev);
  const Matrix nbr_sum = matmul(adjacency_matrix(g), h_prev);
  const Matrix pre =
      matmul(x, layer.params.at("theta_self")) + matmul(nbr_sum, layer.params.at("theta_nbr"));
  return activation_forward(layer.activation, pre);
}

BackwardResult nn4g_backward(const Nn4gLayer& layer, const Graph& g, const Matrix& x,
                             const Matrix& h_prev, const Matrix& grad_out) {
  check_nn4g(layer, g, x, h_prev);
  const Matrix& ts = layer.params.at("theta_self");
  const Matrix& tn = layer.params.at("theta_nbr");
  const Matrix adj = adjacency_matrix(g);
  const Matrix nbr_sum = matmul(adj, h_prev);
  const Matrix d_pre =
      activation_backward(layer.activation, matmul(x, ts) + matmul(nbr_sum, tn), grad_out);
  const Matrix inputs[] = {x, h_prev};
  return BackwardResult({matmul_nt(d_pre, ts), matmul(adj, matmul_nt(d_pre, tn))},
                        {{"theta_self", matmul_tn(x, d_pre)}, {"theta_nbr", matmul_tn(nbr_sum, d_pre)}},
                        inputs, layer.params);
}

// ---- GraphSage --------------------------------------------------------------

GraphSageLayer make_graphsage_layer(std::size_t in, std::size_t out, Aggregator aggregator,
                                    std::size_t sample_size, std::uint64_t seed,
                                    Activation activation, Rng& rng) {
  if (sample_size == 0) throw ContractError("graphsage: sample_size must be >= 1");
  GraphSageLayer layer;
  layer.aggregator = aggregator;
  layer.sample_size = sample_size;
  layer.seed = seed;
  layer.activation = activation;
  layer.params["W"] = glorot_uniform(2 * in, out, 2 * in, out, rng);
  if (aggregator == Aggregator::kPooling) {
    layer.params["W_pool"] = glorot_uniform(in, in, in, in, rng);
    layer.params["b_pool"] = Matrix(1, in);
  }
  return layer;
}

std::vector<NeighborSample> graphsage_samples(const GraphSageLayer& layer, const Graph& g,
                                              std::size_t epoch) {
  std::vector<NeighborSample> samples;
  samples.reserve(g.node_count());
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    samples.push_back(sample_neighbors(g, v, layer.sample_size, derive_seed(layer.seed, epoch, v)));
  }
  return samples;
}

namespace {

std::size_t sage_in_dim(const GraphSageLayer& layer) { return layer.params.at("W").rows() / 2; }

// relu(h W_pool + b_pool) for every node.
Matrix pool_pre(const GraphSageLayer& layer, const Matrix& h) {
  return add_row_broadcast(matmul(h, layer.params.at("W_pool")), layer.params.at("b_pool"));
}

// Index into `neighbors` of the maximiser of column j; ties go to the lowest node id.
std::size_t pooled_argmax(const Matrix& pooled, std::span<const std::size_t> neighbors,
                          std::size_t j) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < neighbors.size(); ++i) {
    const double cand = pooled(neighbors[i], j);
    const double cur = pooled(neighbors[best], j);
    if (cand > cur || (cand == cur && neighbors[i] < neighbors[best])) best = i;
  }
  return best;
}

void aggregate_into(const GraphSageLayer& layer, const Matrix& h, const Matrix* pooled,
                    std::span<const std::size_t> neighbors, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (neighbors.empty()) return;
  if (layer.aggregator == Aggregator::kMean) {
    // Summed in index order so any listing of the same set gives the same bits.
    std::vector<std::size_t> sorted(neighbors.begin(), neighbors.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t u : sorted) {
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += h(u, j);
    }
    for (double& v : out) v /= static_cast<double>(neighbors.size());
    return;
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = (*pooled)(neighbors[pooled_argmax(*pooled, neighbors, j)], j);
  }
}

Matrix sage_concat(const GraphSageLayer& layer, const Matrix& h, const Matrix* pooled,
                   const std::vector<NeighborSample>& samples) {
  const std::size_t in = h.cols();
  Matrix concat(h.rows(), 2 * in);
  for (std::size_t v = 0; v < h.rows(); ++v) {
    auto row = concat.row(v);
    std::copy(h.row(v).begin(), h.row(v).end(), row.begin());
    aggregate_into(layer, h, pooled, samples[v].sampled, row.subspan(in));
  }
  return concat;
}

void check_sage(const GraphSageLayer& layer, const Graph& g, const Matrix& h) {
  require_rows(h, g.node_count(), "graphsage");
  if (h.cols() != sage_in_dim(layer)) {
    throw ShapeError("graphsage: feature width " + std::to_string(h.cols()) + " vs W " +
                     layer.params.at("W").shape_string());
  }
}

}  // namespace

Matrix aggregate_neighbors(const GraphSageLayer& layer, const Matrix& h,
                           std::span<const std::size_t> neighbors) {
  Matrix out(1, h.cols());
  const Matrix pooled = layer.aggregator == Aggregator::kPooling ? relu_forward(pool_pre(layer, h))
                                                                 : Matrix();
  aggregate_into(layer, h, &pooled, neighbors, out.row(0));
  return out;
}

Matrix graphsage_forward(const GraphSageLayer& layer, const Graph& g, const Matrix& h,
                         std::size_t epoch) {
  check_sage(layer, g, h);
  const auto samples = graphsage_samples(layer, g, epoch);
  const Matrix pooled = layer.aggregator == Aggregator::kPooling ? relu_forward(pool_pre(layer, h))
                                                                 : Matrix();
  return activation_forward(layer.activation,
                            matmul(sage_concat(layer, h, &pooled, samples), layer.params.at("W")));
}

BackwardResult graphsage_backward(const GraphSageLayer& layer, const Graph& g, const Matrix& h,
                                  const Matrix& grad_out, std::size_t epoch) {
  check_sage(layer, g, h);
  const std::size_t in = h.cols();
  const Matrix& w = layer.params.at("W");
  const auto samples = graphsage_samples(layer, g, epoch);
  const bool pooling = layer.aggregator == Aggregator::kPooling;
  const Matrix pre = pooling ? pool_pre(layer, h) : Matrix();
  const Matrix pooled = pooling ? relu_forward(pre) : Matrix();
  const Matrix concat = sage_concat(layer, h, &pooled, samples);
  const Matrix d_pre = activation_backward(layer.activation, matmul(concat, w), grad_out);
  const Matrix d_concat = matmul_nt(d_pre, w);

  LayerParams grads{{"W", matmul_tn(concat, d_pre)}};
  Matrix d_h(h.rows(), in);
  Matrix d_pooled(pooling ? h.rows() : 0, in);
  for (std::size_t v = 0; v < h.rows(); ++v) {
    for (std::size_t j = 0; j < in; ++j) d_h(v, j) += d_concat(v, j);
    const auto& nbrs = samples[v].sampled;
    if (nbrs.empty()) continue;
    if (!pooling) {
      const double share = 1.0 / static_cast<double>(nbrs.size());
      for (std::size_t u : nbrs) {
        for (std::size_t j = 0; j < in; ++j) d_h(u, j) += share * d_concat(v, in + j);
      }
    } else {
      for (std::size_t j = 0; j < in; ++j) {
        d_pooled(nbrs[pooled_argmax(pooled, nbrs, j)], j) += d_concat(v, in + j);
      }
    }
  }
  if (pooling) {
    const Matrix d_pool_pre = relu_backward(pre, d_pooled);
    grads["W_pool"] = matmul_tn(h, d_pool_pre);
    grads["b_pool"] = column_sums(d_pool_pre);
    d_h += matmul_nt(d_pool_pre, layer.params.at("W_pool"));
  }
  const Matrix inputs[] = {h};
  return BackwardResult({d_h}, std::move(grads), inputs, layer.params);
}

}  // namespace msf
