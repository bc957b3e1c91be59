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

#include "msf/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>

#include <json.hpp>

#include "msf/errors.hpp"
#include "msf/rng.hpp"

namespace msf {

void TrainConfig::validate() const {
  if (!(lr_initial > 0.0) || !(lr_final > 0.0)) throw ContractError("TrainConfig: lr must be positive");
  if (lr_final > lr_initial) throw ContractError("TrainConfig: lr_final exceeds lr_initial");
  if (epochs == 0) throw ContractError("TrainConfig: epochs must be positive");
  if (decay_epoch >= epochs) throw ContractError("TrainConfig: decay_epoch must be below epochs");
  if (batch_size == 0) throw ContractError("TrainConfig: batch_size must be positive");
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ContractError("SplitSpec: train_fraction must lie in (0, 1)");
  }
  if (folds < 2) throw ContractError("SplitSpec: folds must be at least 2");
}

std::string to_jsonl(const EpochLog& log) {
  nlohmann::json j;
  j["epoch"] = log.epoch;
  j["loss"] = log.mean_loss;
  j["acc"] = log.train_accuracy;
  j["lr"] = log.lr;
  return j.dump();
}

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ContractError("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
    y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

CrossEntropy cross_entropy(const Matrix& probs, const Matrix& labels) {
  require_same_shape(probs, labels, "cross_entropy");
  const std::size_t n = probs.rows();
  if (n == 0) throw ShapeError("cross_entropy: empty batch");
  CrossEntropy out;
  out.logit_grad = Matrix(n, probs.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    int ones = 0;
    double row_sum = 0.0;
    for (std::size_t k = 0; k < probs.cols(); ++k) {
      const double y = labels(i, k);
      if (y == 1.0) {
        ++ones;
      } else if (y != 0.0) {
        throw ContractError("cross_entropy: labels row " + std::to_string(i) + " is not one-hot");
      }
      row_sum += probs(i, k);
      if (y == 1.0) total -= std::log(std::max(probs(i, k), 1e-12));
      out.logit_grad(i, k) = (probs(i, k) - y) / static_cast<double>(n);
    }
    if (ones != 1) {
      throw ContractError("cross_entropy: labels row " + std::to_string(i) + " is not one-hot");
    }
    if (std::abs(row_sum - 1.0) > 1e-9) {
      throw ContractError("cross_entropy: probs row " + std::to_string(i) + " does not sum to 1");
    }
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

double lr_at(const TrainConfig& config, std::size_t epoch) {
  if (epoch >= config.epochs) {
    throw ContractError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                        std::to_string(config.epochs) + ")");
  }
  return epoch < config.decay_epoch ? config.lr_initial : config.lr_final;
}

void sgd_step(Params& params, const Params& grads, double lr) {
  if (params.size() != grads.size()) throw ContractError("sgd_step: registry size mismatch");
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("sgd_step: unknown parameter '" + name + "'");
    if (it->second.rows() != g.rows() || it->second.cols() != g.cols()) {
      throw ShapeError("sgd_step: shape mismatch for '" + name + "'");
    }
  }
  for (auto& [name, theta] : params) {
    const Matrix& g = grads.at(name);
    auto& t = theta.data();
    const auto& d = g.data();
    for (std::size_t i = 0; i < theta.size(); ++i) t[i] -= lr * d[i];
  }
}

Split split(std::span<const int> labels, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = labels.size();
  if (n < 10) throw ContractError("split: need at least 10 items, got " + std::to_string(n));
  Rng rng(splitmix64(spec.seed));
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);

  const auto target = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  Split out;
  std::vector<std::size_t> pool;
  for (auto& [cls, items] : by_class) {
    std::shuffle(items.begin(), items.end(), rng);
    if (items.size() < 2) {
      out.unstratified_classes.push_back(cls);
      pool.insert(pool.end(), items.begin(), items.end());
      continue;
    }
    const auto take = static_cast<std::size_t>(
        std::floor(spec.train_fraction * static_cast<double>(items.size())));
    out.train.insert(out.train.end(), items.begin(), items.begin() + static_cast<std::ptrdiff_t>(take));
    pool.insert(pool.end(), items.begin() + static_cast<std::ptrdiff_t>(take), items.end());
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  const std::size_t fill = target - out.train.size();
  out.train.insert(out.train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(fill));
  out.test.assign(pool.begin() + static_cast<std::ptrdiff_t>(fill), pool.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<Fold> k_fold(std::span<const std::size_t> items, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ContractError("k_fold: folds must be at least 2");
  if (folds > items.size()) {
    throw ContractError("k_fold: " + std::to_string(folds) + " folds for " +
                        std::to_string(items.size()) + " items");
  }
  std::vector<std::size_t> order(items.begin(), items.end());
  Rng rng(splitmix64(seed ^ 0x5f0fULL));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Fold> out(folds);
  const std::size_t base = order.size() / folds;
  const std::size_t extra = order.size() % folds;
  std::size_t begin = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i >= begin && i < begin + len ? out[f].validation : out[f].fit).push_back(order[i]);
    }
    std::sort(out[f].fit.begin(), out[f].fit.end());
    std::sort(out[f].validation.begin(), out[f].validation.end());
    begin += len;
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> items,
                                                   std::size_t batch_size, std::size_t min_batch) {
  if (batch_size == 0) throw ContractError("make_batches: batch_size must be positive");
  if (items.size() < min_batch) {
    throw ContractError("make_batches: " + std::to_string(items.size()) +
                        " items cannot form a batch of at least " + std::to_string(min_batch));
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < items.size(); i += batch_size) {
    const std::size_t end = std::min(items.size(), i + batch_size);
    std::vector<std::size_t> chunk(items.begin() + static_cast<std::ptrdiff_t>(i),
                                   items.begin() + static_cast<std::ptrdiff_t>(end));
    if (chunk.size() < min_batch && !out.empty()) {
      out.back().insert(out.back().end(), chunk.begin(), chunk.end());
    } else {
      out.push_back(std::move(chunk));
    }
  }
  return out;
}

Matrix predict_batched(TrainingTask& task, std::span<const std::size_t> items, std::size_t batch_size) {
  const auto batches = make_batches(items, batch_size, task.min_batch());
  Matrix out;
  std::size_t row = 0;
  for (const auto& batch : batches) {
    Matrix p = task.predict(batch);
    if (out.empty()) out = Matrix(items.size(), p.cols());
    for (std::size_t i = 0; i < p.rows(); ++i, ++row) {
      for (std::size_t k = 0; k < p.cols(); ++k) out(row, k) = p(i, k);
    }
  }
  return out;
}

double accuracy(TrainingTask& task, std::span<const std::size_t> items, std::size_t batch_size) {
  if (items.empty()) throw ContractError("accuracy: no items");
  const Matrix p = predict_batched(task, items, batch_size);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto row = p.row(i);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == task.label(items[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

std::vector<EpochLog> train_loop(TrainingTask& task, std::span<const std::size_t> fit_items,
                                 const TrainConfig& config,
                                 const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  std::vector<EpochLog> logs;
  std::vector<std::size_t> order(fit_items.begin(), fit_items.end());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch, 0x7a11ULL));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = lr_at(config, epoch);
    double loss_sum = 0.0;
    const auto batches = make_batches(order, config.batch_size, task.min_batch());
    for (const auto& batch : batches) {
      Params grads;
      const double loss = task.loss_and_gradients(batch, epoch, grads);
      if (!std::isfinite(loss)) {
        throw NumericError("train_loop: non-finite loss at epoch " + std::to_string(epoch));
      }
      sgd_step(task.parameters(), grads, lr);
      task.parameters_updated();
      loss_sum += loss;
    }
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(batches.size());
    log.train_accuracy = accuracy(task, fit_items, config.batch_size);
    log.lr = lr;
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

ProtocolResult run_protocol(const std::function<std::unique_ptr<TrainingTask>()>& make_task,
                            std::span<const int> labels, const TrainConfig& train,
                            const SplitSpec& split_spec,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  ProtocolResult out;
  out.split = split(labels, split_spec);
  const auto folds = k_fold(out.split.train, split_spec.folds, split_spec.seed);
  for (const auto& fold : folds) {
    auto task = make_task();
    train_loop(*task, fold.fit, train);
    out.fold_accuracy.push_back(accuracy(*task, fold.validation, train.batch_size));
  }
  const double k = static_cast<double>(out.fold_accuracy.size());
  out.cv_mean = std::accumulate(out.fold_accuracy.begin(), out.fold_accuracy.end(), 0.0) / k;
  double var = 0.0;
  for (double a : out.fold_accuracy) var += (a - out.cv_mean) * (a - out.cv_mean);
  out.cv_std = std::sqrt(var / k);
  out.final_task = make_task();
  out.logs = train_loop(*out.final_task, out.split.train, train, on_epoch);
  return out;
}

}  // namespace msf
