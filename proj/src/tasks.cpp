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

#include "msf/tasks.hpp"

#include <string>

#include "msf/errors.hpp"
#include "msf/layers.hpp"
#include "msf/rng.hpp"

namespace msf {

namespace {

std::string gcn_key(std::size_t l) { return "gcn" + std::to_string(l + 1) + ".W"; }

Matrix take_rows(const Matrix& m, std::span<const std::size_t> items) {
  Matrix out(items.size(), m.cols());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto src = m.row(items[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::vector<int> take_labels(const std::vector<int>& labels, std::span<const std::size_t> items) {
  std::vector<int> out;
  out.reserve(items.size());
  for (auto i : items) out.push_back(labels.at(i));
  return out;
}

}  // namespace

NodeClassificationTask::NodeClassificationTask(const Graph& graph, std::vector<int> labels,
                                               std::size_t classes,
                                               std::vector<std::size_t> hidden,
                                               std::uint64_t seed)
    : a_norm_(normalized_adjacency(graph)),
      labels_(std::move(labels)),
      classes_(classes),
      depth_(hidden.size() + 1) {
  if (!graph.features()) throw ContractError("NodeClassificationTask: graph has no features");
  features_ = *graph.features();
  if (labels_.size() != graph.node_count()) {
    throw ShapeError("NodeClassificationTask: one label per node required");
  }
  Rng rng(splitmix64(seed));
  std::size_t in = features_.cols();
  hidden.push_back(classes);
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    params_.emplace(gcn_key(l), make_gcn_layer(in, hidden[l], Activation::kIdentity, rng).params.at("W"));
    in = hidden[l];
  }
}

std::vector<GcnLayer> NodeClassificationTask::layers() const {
  std::vector<GcnLayer> out;
  for (std::size_t l = 0; l < depth_; ++l) {
    out.push_back({{{"W", params_.at(gcn_key(l))}},
                   l + 1 == depth_ ? Activation::kIdentity : Activation::kRelu});
  }
  return out;
}

Matrix NodeClassificationTask::forward_all() const {
  Matrix h = features_;
  for (const auto& layer : layers()) h = gcn_forward(layer, a_norm_, h);
  return row_softmax(h);
}

double NodeClassificationTask::loss_and_gradients(std::span<const std::size_t> batch, std::size_t,
                                                  Params& grads) {
  const auto stack = layers();
  std::vector<Matrix> inputs;
  Matrix h = features_;
  for (const auto& layer : stack) {
    inputs.push_back(h);
    h = gcn_forward(layer, a_norm_, h);
  }
  const Matrix probs = row_softmax(h);
  const auto y = take_labels(labels_, batch);
  const CrossEntropy ce = cross_entropy(take_rows(probs, batch), one_hot(y, classes_));
  Matrix d_h(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t k = 0; k < classes_; ++k) d_h(batch[i], k) += ce.logit_grad(i, k);
  }
  grads.clear();
  for (std::size_t l = depth_; l-- > 0;) {
    const auto r = gcn_backward(stack[l], a_norm_, inputs[l], d_h);
    grads.emplace(gcn_key(l), r.param_grads.at("W"));
    d_h = r.input_grad();
  }
  return ce.loss;
}

Matrix NodeClassificationTask::predict(std::span<const std::size_t> items) {
  if (!cached_) cached_ = forward_all();
  return take_rows(*cached_, items);
}

SoftmaxRegressionTask::SoftmaxRegressionTask(Matrix features, std::vector<int> labels,
                                             std::size_t classes, std::uint64_t seed)
    : features_(std::move(features)), labels_(std::move(labels)), classes_(classes) {
  if (labels_.size() != features_.rows()) {
    throw ShapeError("SoftmaxRegressionTask: one label per row required");
  }
  Rng rng(splitmix64(seed));
  for (auto& [name, m] : dense_init(features_.cols(), classes, rng)) params_.emplace("dense." + name, m);
}

Matrix SoftmaxRegressionTask::rows(std::span<const std::size_t> items) const {
  return take_rows(features_, items);
}

double SoftmaxRegressionTask::loss_and_gradients(std::span<const std::size_t> batch, std::size_t,
                                                 Params& grads) {
  const LayerParams p{{"W", params_.at("dense.W")}, {"b", params_.at("dense.b")}};
  const Matrix x = rows(batch);
  const Matrix probs = row_softmax(dense_forward(p, x));
  const CrossEntropy ce = cross_entropy(probs, one_hot(take_labels(labels_, batch), classes_));
  const auto r = dense_backward(p, x, ce.logit_grad);
  grads.clear();
  for (const auto& [name, g] : r.param_grads) grads.emplace("dense." + name, g);
  return ce.loss;
}

Matrix SoftmaxRegressionTask::predict(std::span<const std::size_t> items) {
  const LayerParams p{{"W", params_.at("dense.W")}, {"b", params_.at("dense.b")}};
  return row_softmax(dense_forward(p, rows(items)));
}

}  // namespace msf
