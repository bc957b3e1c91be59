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
#include <cstdio>
#include <string>

#include "msf/data.hpp"
#include "msf/errors.hpp"
#include "msf/rng.hpp"

namespace msf {

namespace {

constexpr double kLow = 48.0;
constexpr double kHigh = 208.0;

// Periodic box blur of radius r along both axes.
std::vector<double> box_blur(const std::vector<double>& src, std::size_t size, std::size_t r) {
  const auto n = static_cast<std::ptrdiff_t>(size);
  const auto rr = static_cast<std::ptrdiff_t>(r);
  const double norm = 1.0 / static_cast<double>(2 * r + 1);
  std::vector<double> tmp(src.size());
  std::vector<double> out(src.size());
  for (std::ptrdiff_t y = 0; y < n; ++y) {
    for (std::ptrdiff_t x = 0; x < n; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t d = -rr; d <= rr; ++d) s += src[y * n + ((x + d) % n + n) % n];
      tmp[y * n + x] = s * norm;
    }
  }
  for (std::ptrdiff_t y = 0; y < n; ++y) {
    for (std::ptrdiff_t x = 0; x < n; ++x) {
      double s = 0.0;
      for (std::ptrdiff_t d = -rr; d <= rr; ++d) s += tmp[(((y + d) % n + n) % n) * n + x];
      out[y * n + x] = s * norm;
    }
  }
  return out;
}

ImageRecord texture(std::size_t size, std::size_t radius, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> noise(size * size);
  for (double& v : noise) v = unit(rng);
  const auto smooth = box_blur(noise, size, radius);
  auto sorted = smooth;
  auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double threshold = *mid;
  ImageRecord img;
  img.channels = 1;
  img.height = size;
  img.width = size;
  img.pixels.resize(size * size);
  for (std::size_t i = 0; i < smooth.size(); ++i) img.pixels[i] = smooth[i] >= threshold ? kHigh : kLow;
  return img;
}

}  // namespace

std::vector<ImageRecord> synth_texture_dataset(std::size_t n_per_class, std::size_t size,
                                               std::uint64_t seed) {
  if (size < 16) throw ContractError("synth_texture_dataset: size must be >= 16");
  Rng rng(splitmix64(seed));
  std::vector<ImageRecord> out;
  out.reserve(2 * n_per_class);
  for (int label = 0; label < 2; ++label) {
    const std::size_t radius = label == 0 ? size / 4 : 1;
    for (std::size_t i = 0; i < n_per_class; ++i) {
      ImageRecord img = texture(size, radius, rng);
      img.label = label;
      char id[32];
      std::snprintf(id, sizeof id, "tex_c%d_%05zu", label, i);
      img.id = id;
      out.push_back(std::move(img));
    }
  }
  return out;
}

SbmDataset synth_sbm_graph(const SbmSpec& spec) {
  if (!(spec.p_out >= 0.0 && spec.p_out < spec.p_in && spec.p_in <= 1.0)) {
    throw ContractError("synth_sbm_graph: need 0 <= p_out < p_in <= 1");
  }
  if (spec.feature_dim < spec.blocks) {
    throw ContractError("synth_sbm_graph: feature_dim must be >= blocks");
  }
  const std::size_t n = spec.blocks * spec.nodes_per_block;
  Rng rng(splitmix64(spec.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SbmDataset out;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = static_cast<int>(i / spec.nodes_per_block);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = out.labels[i] == out.labels[j] ? spec.p_in : spec.p_out;
      if (unit(rng) < p) edges.emplace_back(i, j);
    }
  }
  Matrix features = normal_matrix(n, spec.feature_dim, 1.0, rng);
  for (std::size_t i = 0; i < n; ++i) features(i, static_cast<std::size_t>(out.labels[i])) += spec.feature_shift;
  out.graph = Graph(n, std::move(edges), std::move(features));
  return out;
}

}  // namespace msf
