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
#include <filesystem>
#include <string>
#include <vector>

#include "msf/graph.hpp"
#include "msf/layers.hpp"

namespace msf {

enum class PixelScale { kRaw8, kUnit, kSymmetric };

// Planar (channel-major) pixels. Raw images hold integral values in
// [0, 255]; normalized ones hold [0, 1] or [-1, 1].
struct ImageRecord {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;
  int label = 0;
  std::string id;
  PixelScale scale = PixelScale::kRaw8;

  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
};

// ---- preprocessing -----------------------------------------------------------

// Bilinear sample of channel c at fractional source coordinates (clamped).
double bilinear_sample(const ImageRecord& img, std::size_t c, double sy, double sx);

// Bilinear, half-pixel centres. Raw images are re-quantized to integers.
ImageRecord resize(const ImageRecord& img, std::size_t height, std::size_t width);

// Per channel: v' = round(255 (cdf(v) - cdf_min) / (n - cdf_min)); constant
// channels pass through.
ImageRecord histogram_equalize(const ImageRecord& img);

// Median of the window x window neighbourhood, replicated borders.
ImageRecord median_denoise(const ImageRecord& img, std::size_t window = 3);

enum class NormalizeRange { kUnit, kSymmetric };

ImageRecord normalize(const ImageRecord& img, NormalizeRange range = NormalizeRange::kUnit);

struct PreprocessConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  bool equalize = true;
  bool denoise = true;
  std::size_t denoise_window = 3;
  NormalizeRange range = NormalizeRange::kUnit;
};

// resize -> equalize -> denoise -> normalize
ImageRecord preprocess(const ImageRecord& img, const PreprocessConfig& cfg);

FeatureMap to_feature_map(const ImageRecord& img);

// ---- image files ---------------------------------------------------------------

// "IMG8", height u32 LE, width u32 LE, then planar bytes; channels inferred.
void write_img8(const std::filesystem::path& path, const ImageRecord& img);
ImageRecord read_img8(const std::filesystem::path& path);
ImageRecord read_png(const std::filesystem::path& path);
// Dispatch on extension (.img8 / .png).
ImageRecord read_image(const std::filesystem::path& path);

// ---- ISIC-style directory layout ---------------------------------------------

struct ManifestEntry {
  std::filesystem::path path;
  int label = 0;
  std::string id;
};

struct DatasetManifest {
  std::vector<ManifestEntry> records;  // sorted by id
  std::vector<std::string> class_names;
};

// root/labels.csv ("id,label") and root/images/<id>.img8 or .png. Labels are
// class names from root/classes.txt when present, otherwise integer indices.
DatasetManifest load_isic_layout(const std::filesystem::path& root);

// Reads and preprocesses every manifest entry.
std::vector<ImageRecord> load_images(const DatasetManifest& manifest, const PreprocessConfig& cfg);

// ---- synthetic data ------------------------------------------------------------

// Class 0: thresholded noise smoothed at radius size/4 (coarse blobs).
// Class 1: the same at radius 1 (fine grain). Both are thresholded at the
// per-image median, so class mean intensities match.
std::vector<ImageRecord> synth_texture_dataset(std::size_t n_per_class, std::size_t size,
                                               std::uint64_t seed);

struct SbmSpec {
  std::size_t blocks = 2;
  std::size_t nodes_per_block = 50;
  double p_in = 0.3;
  double p_out = 0.02;
  std::size_t feature_dim = 8;
  double feature_shift = 0.5;
  std::uint64_t seed = 0;
};

struct SbmDataset {
  Graph graph;  // carries the features
  std::vector<int> labels;
};

// Features are N(0, 1) noise plus feature_shift on the column of the node's block.
SbmDataset synth_sbm_graph(const SbmSpec& spec);

}  // namespace msf
