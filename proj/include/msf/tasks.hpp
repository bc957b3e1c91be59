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
#include <optional>
#include <span>
#include <vector>

#include "msf/gnn.hpp"
#include "msf/graph.hpp"
#include "msf/training.hpp"

namespace msf {

// Transductive node classification with a GCN stack on one fixed graph:
// relu hidden layers, identity output layer, row softmax. Items are node ids;
// every forward runs over the whole graph and the loss is taken on the batch.
class NodeClassificationTask : public TrainingTask {
 public:
  NodeClassificationTask(const Graph& graph, std::vector<int> labels, std::size_t classes,
                         std::vector<std::size_t> hidden, std::uint64_t seed);

  Params& parameters() override {
    cached_.reset();
    return params_;
  }
  void parameters_updated() override { cached_.reset(); }
  double loss_and_gradients(std::span<const std::size_t> batch, std::size_t epoch,
                            Params& grads) override;
  Matrix predict(std::span<const std::size_t> items) override;
  int label(std::size_t item) const override { return labels_.at(item); }

  // Class probabilities for every node.
  Matrix forward_all() const;

 private:
  std::vector<GcnLayer> layers() const;

  Matrix a_norm_;
  Matrix features_;
  std::vector<int> labels_;
  std::size_t classes_;
  std::size_t depth_;
  Params params_;
  std::optional<Matrix> cached_;  // forward_all() at the current parameters
};

// Multinomial logistic regression: softmax(x W + b).
class SoftmaxRegressionTask : public TrainingTask {
 public:
  SoftmaxRegressionTask(Matrix features, std::vector<int> labels, std::size_t classes,
                        std::uint64_t seed);

  Params& parameters() override { return params_; }
  double loss_and_gradients(std::span<const std::size_t> batch, std::size_t epoch,
                            Params& grads) override;
  Matrix predict(std::span<const std::size_t> items) override;
  int label(std::size_t item) const override { return labels_.at(item); }

 private:
  Matrix rows(std::span<const std::size_t> items) const;

  Matrix features_;
  std::vector<int> labels_;
  std::size_t classes_;
  Params params_;
};

}  // namespace msf
