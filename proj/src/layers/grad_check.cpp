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

#include <algorithm>
#include <cmath>
#include <string>

#include "msf/errors.hpp"
#include "msf/layers.hpp"

namespace msf {

double relative_error(double analytic, double numeric) noexcept {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double projected(const Matrix& out, const Matrix& probe) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.data()[i] * probe.data()[i];
  return s;
}

}  // namespace

GradCheckResult grad_check(const GradCheckCase& c, double epsilon, std::uint64_t seed) {
  LayerParams params = c.params;
  std::vector<Matrix> inputs = c.inputs;
  const Matrix out = c.forward(params, inputs);
  Rng rng(seed);
  const Matrix probe = uniform_matrix(out.rows(), out.cols(), -1.0, 1.0, rng);
  const BackwardResult analytic = c.backward(params, inputs, probe);

  GradCheckResult result;
  auto consider = [&](double a, double n, const std::string& where) {
    const double err = relative_error(a, n);
    if (result.worst.empty() || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst = where;
    }
  };
  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + epsilon;
    const double plus = projected(c.forward(params, inputs), probe);
    slot = saved - epsilon;
    const double minus = projected(c.forward(params, inputs), probe);
    slot = saved;
    return (plus - minus) / (2.0 * epsilon);
  };

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Matrix& grad = analytic.input_grads.at(i);
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      consider(grad.data()[j], central(inputs[i].data()[j]),
               "input " + std::to_string(i) + "[" + std::to_string(j) + "]");
    }
  }
  for (auto& [name, value] : params) {
    const Matrix& grad = analytic.param_grads.at(name);
    for (std::size_t j = 0; j < value.size(); ++j) {
      consider(grad.data()[j], central(value.data()[j]), "param " + name + "[" + std::to_string(j) + "]");
    }
  }
  return result;
}

}  // namespace msf
