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

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "msf/gnn.hpp"
#include "msf/graph.hpp"
#include "msf/layers.hpp"
#include "msf/training.hpp"

namespace msf {

enum class GnnKind { kGcn, kGraphSage };

GnnKind parse_gnn_kind(const std::string& name);
const char* gnn_kind_name(GnnKind kind) noexcept;

struct MsfCnnConfig {
  std::size_t in_channels = 1;
  std::size_t image_size = 32;
  std::vector<std::size_t> conv_channels{8, 8, 8, 8};
  // Conv layers (0-based) followed by a 2x2 max pool.
  std::vector<std::size_t> pool_positions{1, 3};
  std::size_t scales = 2;
  // Deepest tap first.
  std::vector<double> fusion_weights{0.6, 0.4};
  // Empty disables the pyramid pooling module.
  std::vector<std::size_t> ppm_levels{1, 2};
  GnnKind gnn = GnnKind::kGcn;
  std::size_t gnn_layers = 2;
  std::size_t gnn_hidden = 16;
  Aggregator sage_aggregator = Aggregator::kMean;
  std::size_t sage_sample = 8;
  std::size_t knn_k = 2;
  std::size_t classes = 2;

  // Throws ContractError / ShapeError on an unbuildable configuration.
  void validate() const;
  // Conv layers (0-based) whose outputs are fused, shallow to deep.
  std::vector<std::size_t> tap_layers() const;
  // Length of one extracted feature row.
  std::size_t feature_dim() const;
  // Closed-form count of trainable scalars.
  std::size_t parameter_count() const;
};

class MsfCnnModel {
 public:
  MsfCnnModel() = default;
  MsfCnnModel(const MsfCnnModel& other);
  MsfCnnModel& operator=(const MsfCnnModel& other);

  const MsfCnnConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const Params& parameters() const noexcept { return params_; }
  // Any mutable access invalidates cached forward passes.
  Params& mutable_parameters() noexcept {
    ++version_;
    return params_;
  }
  // Replaces every parameter; names and shapes must match.
  void load_parameters(const Params& params);
  std::size_t parameter_count() const;
  std::uint64_t version() const noexcept { return version_; }

  // Number of per-image fusion evaluations performed so far.
  std::size_t fusion_invocations() const noexcept { return fusion_calls_.load(); }

 private:
  friend MsfCnnModel build_model(const MsfCnnConfig& config, std::uint64_t seed);
  friend struct FeatureTrace trace_features(const MsfCnnModel& model,
                                            std::span<const FeatureMap> batch);

  MsfCnnConfig config_;
  std::uint64_t seed_ = 0;
  Params params_;
  std::uint64_t version_ = 0;
  mutable std::atomic<std::size_t> fusion_calls_{0};
};

MsfCnnModel build_model(const MsfCnnConfig& config, std::uint64_t seed);

// Intermediates of one image through the conv stack, fusion, PPM and GAP.
struct ImageTrace {
  std::vector<FeatureMap> conv_in;
  std::vector<FeatureMap> conv_pre;  // before ReLU
  std::vector<FeatureMap> conv_act;  // after ReLU, before pooling
  std::vector<FeatureMap> taps;      // shallow to deep
  FeatureMap fused;
  FeatureMap pooled;  // PPM output, or fused when PPM is off
};

struct FeatureTrace {
  std::vector<ImageTrace> images;
  Matrix features;  // one row per image
};

FeatureTrace trace_features(const MsfCnnModel& model, std::span<const FeatureMap> batch);
Matrix extract_features(const MsfCnnModel& model, std::span<const FeatureMap> batch);
// Gradient of <features, grad_features> w.r.t. every parameter (zero outside
// the conv stack).
Params extract_features_backward(const MsfCnnModel& model, const FeatureTrace& trace,
                                 const Matrix& grad_features);

struct ForwardPass {
  FeatureTrace trace;
  Graph graph;
  Matrix a_norm;                    // GCN propagation matrix
  std::vector<Matrix> gnn_inputs;   // input of each GNN layer
  Matrix head_input;
  Matrix probs;
  std::size_t epoch = 0;
  std::uint64_t version = 0;
};

// Class probabilities for the batch (rows sum to 1) plus cached intermediates.
ForwardPass forward(const MsfCnnModel& model, std::span<const FeatureMap> batch,
                    std::size_t epoch = 0);
// Gradient of the batch-mean cross-entropy against one-hot `labels`. The kNN
// graph is held fixed.
Params backward(const MsfCnnModel& model, const ForwardPass& pass, const Matrix& labels);
// Same, starting from an arbitrary gradient w.r.t. the pre-softmax logits.
Params backward_from_logits(const MsfCnnModel& model, const ForwardPass& pass,
                            const Matrix& grad_logits);

// Binary checkpoint: "MSFC", u32 version, then (u16 name length, name,
// u32 rows, u32 cols, little-endian f64 data) records.
void write_checkpoint(std::ostream& out, const Params& params);
void write_checkpoint(const std::string& path, const Params& params);
Params read_checkpoint(std::istream& in);
Params read_checkpoint(const std::string& path);

// Image classification with an MSF-CNN over a fixed image set.
class ImageClassificationTask : public TrainingTask {
 public:
  ImageClassificationTask(MsfCnnModel model, const std::vector<FeatureMap>* images,
                          std::vector<int> labels);

  Params& parameters() override { return model_.mutable_parameters(); }
  double loss_and_gradients(std::span<const std::size_t> batch, std::size_t epoch,
                            Params& grads) override;
  Matrix predict(std::span<const std::size_t> items) override;
  int label(std::size_t item) const override { return labels_.at(item); }
  std::size_t min_batch() const override { return model_.config().knn_k + 1; }

  const MsfCnnModel& model() const noexcept { return model_; }

 private:
  std::vector<FeatureMap> gather(std::span<const std::size_t> items) const;

  MsfCnnModel model_;
  const std::vector<FeatureMap>* images_;
  std::vector<int> labels_;
};

}  // namespace msf
