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

#include <cmath>
#include <string>

#include "msf/errors.hpp"
#include "msf/layers.hpp"

namespace msf {

BackwardResult::BackwardResult(std::vector<Matrix> in_grads, LayerParams grads,
                               std::span<const Matrix> inputs, const LayerParams& params)
    : input_grads(std::move(in_grads)), param_grads(std::move(grads)) {
  if (input_grads.size() != inputs.size()) {
    throw ShapeError("BackwardResult: " + std::to_string(input_grads.size()) +
                     " input gradients for " + std::to_string(inputs.size()) + " inputs");
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    require_same_shape(input_grads[i], inputs[i], "BackwardResult input gradient");
  }
  if (param_grads.size() != params.size()) {
    throw ShapeError("BackwardResult: parameter gradient count mismatch");
  }
  for (const auto& [name, value] : params) {
    const auto it = param_grads.find(name);
    if (it == param_grads.end()) throw ShapeError("BackwardResult: missing gradient for " + name);
    require_same_shape(it->second, value, "BackwardResult parameter gradient");
  }
}

FeatureMap::FeatureMap(std::size_t c, std::size_t h, std::size_t w, double fill)
    : channels(c), height(h), width(w), data(c * h * w, fill) {}

FeatureMap::FeatureMap(std::size_t c, std::size_t h, std::size_t w, std::vector<double> values)
    : channels(c), height(h), width(w), data(std::move(values)) {
  if (data.size() != c * h * w) {
    throw ShapeError("FeatureMap: " + std::to_string(data.size()) + " values for " +
                     std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w));
  }
}

Matrix FeatureMap::to_matrix() const { return Matrix(channels, height * width, data); }

FeatureMap FeatureMap::from_matrix(const Matrix& m, std::size_t height, std::size_t width) {
  if (m.cols() != height * width) {
    throw ShapeError("FeatureMap::from_matrix: " + m.shape_string() + " is not C x " +
                     std::to_string(height) + "*" + std::to_string(width));
  }
  return FeatureMap(m.rows(), height, width, m.data());
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ContractError("unknown activation \"" + name + "\"");
}

const char* activation_name(Activation a) noexcept {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

Matrix relu_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Matrix g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x.data()[i] > 0.0)) g.data()[i] = 0.0;
  }
  return g;
}

Matrix sigmoid_forward(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) v = 1.0 / (1.0 + std::exp(-v));
  return y;
}

Matrix sigmoid_backward(const Matrix& x, const Matrix& grad_out) {
  require_same_shape(x, grad_out, "sigmoid_backward");
  Matrix g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x.data()[i]));
    g.data()[i] *= s * (1.0 - s);
  }
  return g;
}

Matrix activation_forward(Activation a, const Matrix& x) {
  switch (a) {
    case Activation::kRelu: return relu_forward(x);
    case Activation::kSigmoid: return sigmoid_forward(x);
    case Activation::kIdentity: break;
  }
  return x;
}

Matrix activation_backward(Activation a, const Matrix& x, const Matrix& grad_out) {
  switch (a) {
    case Activation::kRelu: return relu_backward(x, grad_out);
    case Activation::kSigmoid: return sigmoid_backward(x, grad_out);
    case Activation::kIdentity: break;
  }
  require_same_shape(x, grad_out, "identity_backward");
  return grad_out;
}

FeatureMap relu_forward(const FeatureMap& x) {
  FeatureMap y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

FeatureMap relu_backward(const FeatureMap& x, const FeatureMap& grad_out) {
  if (x.data.size() != grad_out.data.size()) throw ShapeError("relu_backward: size mismatch");
  FeatureMap g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (!(x.data[i] > 0.0)) g.data[i] = 0.0;
  }
  return g;
}

LayerParams dense_init(std::size_t in, std::size_t out, Rng& rng) {
  return {{"W", glorot_uniform(in, out, in, out, rng)}, {"b", Matrix(1, out)}};
}

Matrix dense_forward(const LayerParams& p, const Matrix& x) {
  const Matrix& w = p.at("W");
  if (x.cols() != w.rows()) {
    throw ShapeError("dense: input " + x.shape_string() + " vs W " + w.shape_string());
  }
  return add_row_broadcast(matmul(x, w), p.at("b"));
}

BackwardResult dense_backward(const LayerParams& p, const Matrix& x, const Matrix& grad_out) {
  const Matrix& w = p.at("W");
  if (x.cols() != w.rows() || grad_out.rows() != x.rows() || grad_out.cols() != w.cols()) {
    throw ShapeError("dense_backward: x " + x.shape_string() + ", W " + w.shape_string() +
                     ", grad " + grad_out.shape_string());
  }
  const Matrix inputs[] = {x};
  return BackwardResult({matmul_nt(grad_out, w)},
                        {{"W", matmul_tn(x, grad_out)}, {"b", column_sums(grad_out)}}, inputs, p);
}

Matrix global_average_pool(const FeatureMap& x) {
  Matrix out(1, x.channels);
  const double n = static_cast<double>(x.plane());
  for (std::size_t c = 0; c < x.channels; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.plane(); ++i) s += x.data[c * x.plane() + i];
    out(0, c) = s / n;
  }
  return out;
}

FeatureMap global_average_pool_backward(const FeatureMap& x, std::span<const double> grad_out) {
  if (grad_out.size() != x.channels) throw ShapeError("global_average_pool_backward: size mismatch");
  FeatureMap g(x.channels, x.height, x.width);
  const double n = static_cast<double>(x.plane());
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t i = 0; i < x.plane(); ++i) g.data[c * x.plane() + i] = grad_out[c] / n;
  }
  return g;
}

}  // namespace msf
