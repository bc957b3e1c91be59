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
#include "msf/kernels.hpp"
#include "msf/layers.hpp"

namespace msf {

namespace {

kernels::ConvShape conv_shape(const LayerParams& p, const FeatureMap& x) {
  const Matrix& w = p.at("W");
  if (x.channels == 0 || w.cols() % x.channels != 0) {
    throw ShapeError("conv2d: W " + w.shape_string() + " does not fit " +
                     std::to_string(x.channels) + " input channels");
  }
  const std::size_t taps = w.cols() / x.channels;
  const auto k = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(taps))));
  if (k * k != taps) {
    throw ShapeError("conv2d: W " + w.shape_string() + " does not fit " +
                     std::to_string(x.channels) + " input channels");
  }
  if (k % 2 == 0) throw ContractError("conv2d: kernel must be odd-sized");
  return {x.channels, w.rows(), x.height, x.width, k};
}

}  // namespace

LayerParams conv2d_init(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                        Rng& rng) {
  if (kernel % 2 == 0) throw ContractError("conv2d: kernel must be odd-sized");
  const std::size_t taps = kernel * kernel;
  return {{"W", glorot_uniform(out_channels, in_channels * taps, in_channels * taps,
                               out_channels * taps, rng)},
          {"b", Matrix(1, out_channels)}};
}

FeatureMap conv2d_forward(const LayerParams& p, const FeatureMap& x) {
  const auto s = conv_shape(p, x);
  FeatureMap y(s.out_channels, x.height, x.width);
  kernels::parallel::conv2d_forward(s, x.data, p.at("W").data(), p.at("b").data(), y.data);
  return y;
}

BackwardResult conv2d_backward(const LayerParams& p, const FeatureMap& x,
                               const FeatureMap& grad_out) {
  const auto s = conv_shape(p, x);
  if (grad_out.channels != s.out_channels || grad_out.height != x.height ||
      grad_out.width != x.width) {
    throw ShapeError("conv2d_backward: upstream gradient shape mismatch");
  }
  Matrix dx(x.channels, x.plane());
  Matrix dw(p.at("W").rows(), p.at("W").cols());
  Matrix db(1, s.out_channels);
  kernels::parallel::conv2d_backward(s, x.data, p.at("W").data(), grad_out.data, dx.data(),
                                     dw.data(), db.data());
  const Matrix inputs[] = {x.to_matrix()};
  return BackwardResult({std::move(dx)}, {{"W", std::move(dw)}, {"b", std::move(db)}}, inputs, p);
}

FeatureMap maxpool2d_forward(const FeatureMap& x, std::size_t window) {
  if (window == 0 || x.height % window != 0 || x.width % window != 0) {
    throw ShapeError("maxpool2d: " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                     " not divisible by window " + std::to_string(window));
  }
  FeatureMap y(x.channels, x.height / window, x.width / window);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t oy = 0; oy < y.height; ++oy) {
      for (std::size_t ox = 0; ox < y.width; ++ox) {
        double best = x.at(c, oy * window, ox * window);
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            best = std::max(best, x.at(c, oy * window + dy, ox * window + dx));
          }
        }
        y.at(c, oy, ox) = best;
      }
    }
  }
  return y;
}

BackwardResult maxpool2d_backward(const FeatureMap& x, const FeatureMap& grad_out,
                                  std::size_t window) {
  if (window == 0 || x.height % window != 0 || x.width % window != 0) {
    throw ShapeError("maxpool2d_backward: indivisible dims");
  }
  if (grad_out.channels != x.channels || grad_out.height * window != x.height ||
      grad_out.width * window != x.width) {
    throw ShapeError("maxpool2d_backward: upstream gradient shape mismatch");
  }
  FeatureMap dx(x.channels, x.height, x.width);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t oy = 0; oy < grad_out.height; ++oy) {
      for (std::size_t ox = 0; ox < grad_out.width; ++ox) {
        std::size_t by = oy * window;
        std::size_t bx = ox * window;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx_ = 0; dx_ < window; ++dx_) {
            const std::size_t yy = oy * window + dy;
            const std::size_t xx = ox * window + dx_;
            if (x.at(c, yy, xx) > x.at(c, by, bx)) {
              by = yy;
              bx = xx;
            }
          }
        }
        dx.at(c, by, bx) += grad_out.at(c, oy, ox);
      }
    }
  }
  const Matrix inputs[] = {x.to_matrix()};
  return BackwardResult({dx.to_matrix()}, {}, inputs, {});
}

}  // namespace msf
