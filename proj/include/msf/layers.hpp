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

// Layers as pure forward/backward function pairs over explicit parameters.
// Backward functions take the forward inputs and the upstream gradient and
// recompute whatever intermediates they need.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "msf/linalg.hpp"
#include "msf/rng.hpp"

namespace msf {

// Parameter matrices by stable per-kind name ("W", "b", "WQ", ...).
using LayerParams = std::map<std::string, Matrix>;

struct BackwardResult {
  BackwardResult() = default;
  // Checks every gradient against the shape of the value it differentiates.
  BackwardResult(std::vector<Matrix> input_grads, LayerParams param_grads,
                 std::span<const Matrix> inputs, const LayerParams& params);

  const Matrix& input_grad() const { return input_grads.at(0); }

  std::vector<Matrix> input_grads;  // one per forward input, same order
  LayerParams param_grads;          // same keys and shapes as the params
};

// channels x height x width, channel-major.
struct FeatureMap {
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0);
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data);

  double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
  std::size_t plane() const noexcept { return height * width; }

  // channels x (height*width)
  Matrix to_matrix() const;
  static FeatureMap from_matrix(const Matrix& m, std::size_t height, std::size_t width);

  bool operator==(const FeatureMap&) const = default;

  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;
};

enum class Activation { kIdentity, kRelu, kSigmoid };

Activation parse_activation(const std::string& name);
const char* activation_name(Activation a) noexcept;

// ---- activations -----------------------------------------------------------

Matrix relu_forward(const Matrix& x);
// Subgradient 0 at exactly 0.
Matrix relu_backward(const Matrix& x, const Matrix& grad_out);
Matrix sigmoid_forward(const Matrix& x);
Matrix sigmoid_backward(const Matrix& x, const Matrix& grad_out);
Matrix activation_forward(Activation a, const Matrix& x);
Matrix activation_backward(Activation a, const Matrix& x, const Matrix& grad_out);

FeatureMap relu_forward(const FeatureMap& x);
FeatureMap relu_backward(const FeatureMap& x, const FeatureMap& grad_out);

// ---- dense: y = x W + b ----------------------------------------------------

LayerParams dense_init(std::size_t in, std::size_t out, Rng& rng);
Matrix dense_forward(const LayerParams& p, const Matrix& x);
BackwardResult dense_backward(const LayerParams& p, const Matrix& x, const Matrix& grad_out);

// ---- 2-D convolution, stride 1, zero padding -------------------------------

// W: out x (in*k*k), b: 1 x out.
LayerParams conv2d_init(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                        Rng& rng);
FeatureMap conv2d_forward(const LayerParams& p, const FeatureMap& x);
BackwardResult conv2d_backward(const LayerParams& p, const FeatureMap& x, const FeatureMap& grad_out);

// ---- non-overlapping max pooling ------------------------------------------

FeatureMap maxpool2d_forward(const FeatureMap& x, std::size_t window = 2);
// Routes to the first maximum in row-major window order.
BackwardResult maxpool2d_backward(const FeatureMap& x, const FeatureMap& grad_out,
                                  std::size_t window = 2);

// ---- multi-head attention --------------------------------------------------

// WQ: d_q x d_model, WK: d_k x d_model, WV: d_v x d_model, WO: d_model x d_out.
LayerParams attention_init(std::size_t d_q, std::size_t d_k, std::size_t d_v, std::size_t d_model,
                           std::size_t d_out, Rng& rng);
// One n_q x n_k row-stochastic matrix per head.
std::vector<Matrix> attention_weights(const LayerParams& p, const Matrix& q, const Matrix& k,
                                      std::size_t heads);
Matrix multihead_attention_forward(const LayerParams& p, const Matrix& q, const Matrix& k,
                                   const Matrix& v, std::size_t heads);
// input_grads = {dq, dk, dv}.
BackwardResult multihead_attention_backward(const LayerParams& p, const Matrix& q, const Matrix& k,
                                            const Matrix& v, std::size_t heads,
                                            const Matrix& grad_out);

// ---- scale fusion ----------------------------------------------------------

// Nearest-neighbour upsampling by an integer factor per axis.
FeatureMap upsample_nearest(const FeatureMap& x, std::size_t height, std::size_t width);
// Sums each output block back onto its source pixel.
FeatureMap upsample_nearest_backward(const FeatureMap& grad_out, std::size_t height,
                                     std::size_t width);

// alpha * deep + (1 - alpha) * shallow; a smaller deep map is upsampled first.
FeatureMap side_fusion_forward(double alpha, const FeatureMap& deep, const FeatureMap& shallow);
// input_grads = {d_deep (deep's own shape), d_shallow}.
BackwardResult side_fusion_backward(double alpha, const FeatureMap& deep, const FeatureMap& shallow,
                                    const FeatureMap& grad_out);

// sum_i weights[i] * maps[i], every map upsampled to the largest spatial size.
FeatureMap weighted_fusion_forward(std::span<const double> weights,
                                   std::span<const FeatureMap> maps);
std::vector<FeatureMap> weighted_fusion_backward(std::span<const double> weights,
                                                 std::span<const FeatureMap> maps,
                                                 const FeatureMap& grad_out);

// ---- pyramid pooling -------------------------------------------------------

// Input channels followed by, per level n, an n x n adaptive average pool
// upsampled back to full size. Output has C * (1 + levels.size()) channels.
FeatureMap pyramid_pooling_forward(const FeatureMap& x, std::span<const std::size_t> levels);
BackwardResult pyramid_pooling_backward(const FeatureMap& x, std::span<const std::size_t> levels,
                                        const FeatureMap& grad_out);

// ---- global average pooling ------------------------------------------------

// 1 x channels
Matrix global_average_pool(const FeatureMap& x);
FeatureMap global_average_pool_backward(const FeatureMap& x, std::span<const double> grad_out);

// ---- gradient checking -----------------------------------------------------

using ForwardFn = std::function<Matrix(const LayerParams&, const std::vector<Matrix>&)>;
using BackwardFn =
    std::function<BackwardResult(const LayerParams&, const std::vector<Matrix>&, const Matrix&)>;

struct GradCheckCase {
  std::string name;
  LayerParams params;
  std::vector<Matrix> inputs;
  ForwardFn forward;
  BackwardFn backward;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // coordinate that produced it, e.g. "param W[3]"
};

// Central differences on <forward(.), R> for a fixed random R, over every
// input and parameter coordinate, against backward(., R). Per-coordinate
// error |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const GradCheckCase& c, double epsilon = 1e-5, std::uint64_t seed = 0);

double relative_error(double analytic, double numeric) noexcept;

}  // namespace msf
