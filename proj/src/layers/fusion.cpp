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
#include <string>

#include "msf/errors.hpp"
#include "msf/layers.hpp"

namespace msf {

namespace {

void check_upsample(const FeatureMap& x, std::size_t height, std::size_t width) {
  if (x.height == 0 || x.width == 0 || height % x.height != 0 || width % x.width != 0) {
    throw ShapeError("upsample: " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                     " does not tile " + std::to_string(height) + "x" + std::to_string(width));
  }
}

FeatureMap align_to(const FeatureMap& x, std::size_t height, std::size_t width) {
  if (x.height == height && x.width == width) return x;
  return upsample_nearest(x, height, width);
}

struct Bin {
  std::size_t begin;
  std::size_t end;
};

// Adaptive pooling bin i of n over an axis of length len.
Bin adaptive_bin(std::size_t i, std::size_t n, std::size_t len) {
  return {(i * len) / n, ((i + 1) * len + n - 1) / n};
}

}  // namespace

FeatureMap upsample_nearest(const FeatureMap& x, std::size_t height, std::size_t width) {
  check_upsample(x, height, width);
  const std::size_t fy = height / x.height;
  const std::size_t fx = width / x.width;
  FeatureMap y(x.channels, height, width);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t col = 0; col < width; ++col) y.at(c, r, col) = x.at(c, r / fy, col / fx);
    }
  }
  return y;
}

FeatureMap upsample_nearest_backward(const FeatureMap& grad_out, std::size_t height,
                                     std::size_t width) {
  const FeatureMap probe(grad_out.channels, height, width);
  check_upsample(probe, grad_out.height, grad_out.width);
  const std::size_t fy = grad_out.height / height;
  const std::size_t fx = grad_out.width / width;
  FeatureMap g(grad_out.channels, height, width);
  for (std::size_t c = 0; c < grad_out.channels; ++c) {
    for (std::size_t r = 0; r < grad_out.height; ++r) {
      for (std::size_t col = 0; col < grad_out.width; ++col) {
        g.at(c, r / fy, col / fx) += grad_out.at(c, r, col);
      }
    }
  }
  return g;
}

FeatureMap side_fusion_forward(double alpha, const FeatureMap& deep, const FeatureMap& shallow) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractError("side_fusion: alpha " + std::to_string(alpha) + " outside [0,1]");
  }
  if (deep.channels != shallow.channels) throw ShapeError("side_fusion: channel counts differ");
  FeatureMap up = align_to(deep, shallow.height, shallow.width);
  if (alpha == 1.0) return up;
  if (alpha == 0.0) return shallow;
  for (std::size_t i = 0; i < up.data.size(); ++i) {
    up.data[i] = alpha * up.data[i] + (1.0 - alpha) * shallow.data[i];
  }
  return up;
}

BackwardResult side_fusion_backward(double alpha, const FeatureMap& deep, const FeatureMap& shallow,
                                    const FeatureMap& grad_out) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ContractError("side_fusion: alpha " + std::to_string(alpha) + " outside [0,1]");
  }
  if (deep.channels != shallow.channels || grad_out.data.size() != shallow.data.size()) {
    throw ShapeError("side_fusion_backward: shape mismatch");
  }
  FeatureMap d_up = grad_out;
  FeatureMap d_shallow = grad_out;
  for (double& v : d_up.data) v *= alpha;
  for (double& v : d_shallow.data) v *= 1.0 - alpha;
  const FeatureMap d_deep = (deep.height == shallow.height && deep.width == shallow.width)
                                ? d_up
                                : upsample_nearest_backward(d_up, deep.height, deep.width);
  const Matrix inputs[] = {deep.to_matrix(), shallow.to_matrix()};
  return BackwardResult({d_deep.to_matrix(), d_shallow.to_matrix()}, {}, inputs, {});
}

FeatureMap weighted_fusion_forward(std::span<const double> weights,
                                   std::span<const FeatureMap> maps) {
  if (maps.empty() || weights.size() != maps.size()) {
    throw ShapeError("weighted_fusion: need one weight per map");
  }
  std::size_t height = 0;
  std::size_t width = 0;
  for (const auto& m : maps) {
    if (m.channels != maps[0].channels) throw ShapeError("weighted_fusion: channel counts differ");
    height = std::max(height, m.height);
    width = std::max(width, m.width);
  }
  FeatureMap out(maps[0].channels, height, width);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const FeatureMap aligned = align_to(maps[i], height, width);
    for (std::size_t j = 0; j < out.data.size(); ++j) out.data[j] += weights[i] * aligned.data[j];
  }
  return out;
}

std::vector<FeatureMap> weighted_fusion_backward(std::span<const double> weights,
                                                 std::span<const FeatureMap> maps,
                                                 const FeatureMap& grad_out) {
  if (maps.empty() || weights.size() != maps.size()) {
    throw ShapeError("weighted_fusion_backward: need one weight per map");
  }
  std::vector<FeatureMap> grads;
  grads.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    FeatureMap g = grad_out;
    for (double& v : g.data) v *= weights[i];
    if (maps[i].height != grad_out.height || maps[i].width != grad_out.width) {
      g = upsample_nearest_backward(g, maps[i].height, maps[i].width);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

FeatureMap pyramid_pooling_forward(const FeatureMap& x, std::span<const std::size_t> levels) {
  if (levels.empty()) throw ContractError("pyramid_pooling: levels must be nonempty");
  const std::size_t C = x.channels;
  FeatureMap out(C * (1 + levels.size()), x.height, x.width);
  std::copy(x.data.begin(), x.data.end(), out.data.begin());
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const std::size_t n = levels[li];
    if (n == 0) throw ContractError("pyramid_pooling: level 0");
    std::vector<double> pooled(n * n);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t by = 0; by < n; ++by) {
        const Bin rows = adaptive_bin(by, n, x.height);
        for (std::size_t bx = 0; bx < n; ++bx) {
          const Bin cols = adaptive_bin(bx, n, x.width);
          double s = 0.0;
          for (std::size_t y = rows.begin; y < rows.end; ++y) {
            for (std::size_t xx = cols.begin; xx < cols.end; ++xx) s += x.at(c, y, xx);
          }
          pooled[by * n + bx] =
              s / static_cast<double>((rows.end - rows.begin) * (cols.end - cols.begin));
        }
      }
      const std::size_t oc = C * (1 + li) + c;
      for (std::size_t y = 0; y < x.height; ++y) {
        for (std::size_t xx = 0; xx < x.width; ++xx) {
          out.at(oc, y, xx) = pooled[(y * n / x.height) * n + (xx * n / x.width)];
        }
      }
    }
  }
  return out;
}

BackwardResult pyramid_pooling_backward(const FeatureMap& x, std::span<const std::size_t> levels,
                                        const FeatureMap& grad_out) {
  if (levels.empty()) throw ContractError("pyramid_pooling: levels must be nonempty");
  const std::size_t C = x.channels;
  if (grad_out.channels != C * (1 + levels.size()) || grad_out.height != x.height ||
      grad_out.width != x.width) {
    throw ShapeError("pyramid_pooling_backward: upstream gradient shape mismatch");
  }
  FeatureMap dx(C, x.height, x.width);
  std::copy(grad_out.data.begin(), grad_out.data.begin() + static_cast<std::ptrdiff_t>(x.data.size()),
            dx.data.begin());
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const std::size_t n = levels[li];
    std::vector<double> bin_grad(n * n);
    for (std::size_t c = 0; c < C; ++c) {
      std::fill(bin_grad.begin(), bin_grad.end(), 0.0);
      const std::size_t oc = C * (1 + li) + c;
      for (std::size_t y = 0; y < x.height; ++y) {
        for (std::size_t xx = 0; xx < x.width; ++xx) {
          bin_grad[(y * n / x.height) * n + (xx * n / x.width)] += grad_out.at(oc, y, xx);
        }
      }
      for (std::size_t by = 0; by < n; ++by) {
        const Bin rows = adaptive_bin(by, n, x.height);
        for (std::size_t bx = 0; bx < n; ++bx) {
          const Bin cols = adaptive_bin(bx, n, x.width);
          const double share = bin_grad[by * n + bx] /
                               static_cast<double>((rows.end - rows.begin) * (cols.end - cols.begin));
          for (std::size_t y = rows.begin; y < rows.end; ++y) {
            for (std::size_t xx = cols.begin; xx < cols.end; ++xx) dx.at(c, y, xx) += share;
          }
        }
      }
    }
  }
  const Matrix inputs[] = {x.to_matrix()};
  return BackwardResult({dx.to_matrix()}, {}, inputs, {});
}

}  // namespace msf
