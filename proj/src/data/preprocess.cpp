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
#include <array>
#include <cmath>
#include <string>

#include "msf/data.hpp"
#include "msf/errors.hpp"
#include "msf/kernels.hpp"

namespace msf {

namespace {

void require_raw(const ImageRecord& img, const char* what) {
  if (img.scale != PixelScale::kRaw8) {
    throw ContractError(std::string(what) + ": expects an 8-bit image");
  }
}

}  // namespace

double bilinear_sample(const ImageRecord& img, std::size_t c, double sy, double sx) {
  sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
  sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(sy));
  const auto x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const double fy = sy - static_cast<double>(y0);
  const double fx = sx - static_cast<double>(x0);
  const double top = (1.0 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1);
  const double bottom = (1.0 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1);
  return (1.0 - fy) * top + fy * bottom;
}

ImageRecord resize(const ImageRecord& img, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ContractError("resize: target dims must be positive");
  if (img.height == 0 || img.width == 0) throw ContractError("resize: empty input image");
  ImageRecord out = img;
  out.height = height;
  out.width = width;
  out.pixels.assign(img.channels * height * width, 0.0);
  const double sy_scale = static_cast<double>(img.height) / static_cast<double>(height);
  const double sx_scale = static_cast<double>(img.width) / static_cast<double>(width);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      const double sy = (static_cast<double>(y) + 0.5) * sy_scale - 0.5;
      for (std::size_t x = 0; x < width; ++x) {
        const double sx = (static_cast<double>(x) + 0.5) * sx_scale - 0.5;
        double v = bilinear_sample(img, c, sy, sx);
        if (img.scale == PixelScale::kRaw8) v = std::clamp(std::round(v), 0.0, 255.0);
        out.at(c, y, x) = v;
      }
    }
  }
  return out;
}

ImageRecord histogram_equalize(const ImageRecord& img) {
  require_raw(img, "histogram_equalize");
  ImageRecord out = img;
  const std::size_t n = img.height * img.width;
  for (std::size_t c = 0; c < img.channels; ++c) {
    std::array<std::size_t, 256> cdf{};
    for (std::size_t i = 0; i < n; ++i) {
      const double v = img.pixels[c * n + i];
      if (v < 0.0 || v > 255.0 || v != std::round(v)) {
        throw ContractError("histogram_equalize: pixel value " + std::to_string(v) + " not 8-bit");
      }
      ++cdf[static_cast<std::size_t>(v)];
    }
    for (std::size_t v = 1; v < 256; ++v) cdf[v] += cdf[v - 1];
    std::size_t cdf_min = 0;
    for (std::size_t v = 0; v < 256; ++v) {
      if (cdf[v] > 0) {
        cdf_min = cdf[v];
        break;
      }
    }
    if (cdf_min == n) continue;  // constant channel
    const double span = static_cast<double>(n - cdf_min);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::size_t>(img.pixels[c * n + i]);
      out.pixels[c * n + i] = std::round(255.0 * static_cast<double>(cdf[v] - cdf_min) / span);
    }
  }
  return out;
}

ImageRecord median_denoise(const ImageRecord& img, std::size_t window) {
  if (window % 2 == 0) throw ContractError("median_denoise: window must be odd");
  ImageRecord out = img;
  kernels::parallel::median_filter(img.channels, img.height, img.width, window, img.pixels,
                                   out.pixels);
  return out;
}

ImageRecord normalize(const ImageRecord& img, NormalizeRange range) {
  require_raw(img, "normalize");
  ImageRecord out = img;
  if (range == NormalizeRange::kUnit) {
    for (double& v : out.pixels) v /= 255.0;
    out.scale = PixelScale::kUnit;
  } else {
    for (double& v : out.pixels) v = v / 127.5 - 1.0;
    out.scale = PixelScale::kSymmetric;
  }
  return out;
}

ImageRecord preprocess(const ImageRecord& img, const PreprocessConfig& cfg) {
  ImageRecord out = resize(img, cfg.height, cfg.width);
  if (cfg.equalize) out = histogram_equalize(out);
  if (cfg.denoise) out = median_denoise(out, cfg.denoise_window);
  return normalize(out, cfg.range);
}

FeatureMap to_feature_map(const ImageRecord& img) {
  return FeatureMap(img.channels, img.height, img.width, img.pixels);
}

}  // namespace msf
