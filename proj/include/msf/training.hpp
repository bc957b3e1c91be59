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
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msf/linalg.hpp"

namespace msf {

// Flat named-parameter registry ("conv1.W", "head.b", ...).
using Params = std::map<std::string, Matrix>;

struct TrainConfig {
  double lr_initial = 0.001;
  double lr_final = 0.0001;
  std::size_t decay_epoch = 50;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::size_t folds = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
  double lr = 0.0;
};

// {"epoch":..,"loss":..,"acc":..,"lr":..}
std::string to_jsonl(const EpochLog& log);

struct CrossEntropy {
  double loss = 0.0;
  Matrix logit_grad;  // (p - y) / N, the gradient through a row softmax
};

// Batch-mean cross-entropy of softmax outputs against one-hot labels, with
// probabilities clamped below at 1e-12.
CrossEntropy cross_entropy(const Matrix& probs, const Matrix& labels);
Matrix one_hot(std::span<const int> labels, std::size_t classes);

// Single step decay: lr_initial before decay_epoch, lr_final from it on.
double lr_at(const TrainConfig& config, std::size_t epoch);

// theta <- theta - lr * grad for every parameter.
void sgd_step(Params& params, const Params& grads, double lr);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  // Classes too small to stratify; their items went to the shared pool.
  std::vector<int> unstratified_classes;
};

// Seeded, stratified per class; floor(train_fraction * n) train items.
Split split(std::span<const int> labels, const SplitSpec& spec);

struct Fold {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> validation;
};

// Seeded shuffle of `items` into `folds` disjoint validation folds whose sizes
// differ by at most one.
std::vector<Fold> k_fold(std::span<const std::size_t> items, std::size_t folds, std::uint64_t seed);

// Consecutive chunks of batch_size; a tail shorter than min_batch is merged
// into the previous chunk.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> items,
                                                   std::size_t batch_size, std::size_t min_batch);

// What train_loop needs from a model bound to its dataset. Items are dataset
// indices.
class TrainingTask {
 public:
  virtual ~TrainingTask() = default;

  virtual Params& parameters() = 0;
  // Called after every optimizer update.
  virtual void parameters_updated() {}
  // Mean loss over the batch; fills grads with the same keys as parameters().
  virtual double loss_and_gradients(std::span<const std::size_t> batch, std::size_t epoch,
                                    Params& grads) = 0;
  // Class probabilities, one row per item.
  virtual Matrix predict(std::span<const std::size_t> items) = 0;
  virtual int label(std::size_t item) const = 0;
  virtual std::size_t min_batch() const { return 1; }
};

// Predictions for `items`, evaluated in make_batches order.
Matrix predict_batched(TrainingTask& task, std::span<const std::size_t> items,
                       std::size_t batch_size);
double accuracy(TrainingTask& task, std::span<const std::size_t> items, std::size_t batch_size);

// epochs x batches SGD steps with a per-epoch seeded shuffle. Each log's
// accuracy is measured on `fit_items` after the epoch's updates. Throws
// NumericError on a non-finite loss.
std::vector<EpochLog> train_loop(TrainingTask& task, std::span<const std::size_t> fit_items,
                                 const TrainConfig& config,
                                 const std::function<void(const EpochLog&)>& on_epoch = {});

struct ProtocolResult {
  Split split;
  std::vector<double> fold_accuracy;
  double cv_mean = 0.0;
  double cv_std = 0.0;
  std::vector<EpochLog> logs;  // final fit on the whole training segment
  std::unique_ptr<TrainingTask> final_task;
};

// split -> k-fold CV on the training segment (reported only) -> final fit.
ProtocolResult run_protocol(const std::function<std::unique_ptr<TrainingTask>()>& make_task,
                            std::span<const int> labels, const TrainConfig& train,
                            const SplitSpec& split_spec,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace msf
