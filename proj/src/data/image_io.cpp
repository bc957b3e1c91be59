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

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "msf/data.hpp"
#include "msf/errors.hpp"
#include "msf/text.hpp"

namespace msf {

namespace {

constexpr std::array<char, 4> kImgMagic = {'I', 'M', 'G', '8'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_img8(const std::filesystem::path& path, const ImageRecord& img) {
  if (img.scale != PixelScale::kRaw8) throw ContractError("write_img8: image is not 8-bit");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out.write(kImgMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(img.height));
  put_u32(out, static_cast<std::uint32_t>(img.width));
  std::vector<char> bytes(img.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::clamp(img.pixels[i], 0.0, 255.0)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError("write failed for " + path.string());
}

ImageRecord read_img8(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || !std::equal(kImgMagic.begin(), kImgMagic.end(), bytes.begin())) {
    throw LoadError(path.string() + ": missing IMG8 header");
  }
  ImageRecord img;
  img.height = get_u32(bytes.data() + 4);
  img.width = get_u32(bytes.data() + 8);
  const std::size_t plane = img.height * img.width;
  const std::size_t payload = bytes.size() - 12;
  if (plane == 0 || payload % plane != 0 || payload == 0) {
    throw LoadError(path.string() + ": payload of " + std::to_string(payload) +
                    " bytes does not fit " + std::to_string(img.height) + "x" +
                    std::to_string(img.width));
  }
  img.channels = payload / plane;
  img.pixels.assign(bytes.begin() + 12, bytes.end());
  img.id = path.stem().string();
  return img;
}

ImageRecord read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw LoadError(path.string() + ": " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw LoadError(path.string() + ": " + msg);
  }
  ImageRecord img;
  img.channels = gray ? 1 : 3;
  img.height = image.height;
  img.width = image.width;
  img.pixels.resize(img.channels * img.height * img.width);
  // interleaved -> planar
  for (std::size_t p = 0; p < img.height * img.width; ++p) {
    for (std::size_t c = 0; c < img.channels; ++c) {
      img.pixels[c * img.height * img.width + p] = buffer[p * img.channels + c];
    }
  }
  img.id = path.stem().string();
  return img;
}

ImageRecord read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".img8") return read_img8(path);
  if (ext == ".png") return read_png(path);
  throw LoadError(path.string() + ": unsupported image extension");
}

DatasetManifest load_isic_layout(const std::filesystem::path& root) {
  const auto csv_path = root / "labels.csv";
  std::ifstream csv(csv_path);
  if (!csv) throw LoadError("missing " + csv_path.string());

  DatasetManifest manifest;
  std::map<std::string, int> by_name;
  const auto classes_path = root / "classes.txt";
  if (std::ifstream classes(classes_path); classes) {
    std::string line;
    while (std::getline(classes, line)) {
      const auto name = std::string(trim(line));
      if (name.empty()) continue;
      by_name.emplace(name, static_cast<int>(manifest.class_names.size()));
      manifest.class_names.push_back(name);
    }
  }
  const bool named = !manifest.class_names.empty();

  std::string line;
  if (!std::getline(csv, line) || trim(line) != "id,label") {
    throw LoadError(csv_path.string() + ": header must be \"id,label\"");
  }
  std::set<std::string> seen;
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    const std::string where = csv_path.string() + " line " + std::to_string(line_no);
    if (cells.size() != 2 || trim(cells[0]).empty()) throw LoadError(where + ": malformed row");
    ManifestEntry e;
    e.id = std::string(trim(cells[0]));
    const std::string label(trim(cells[1]));
    if (named) {
      if (auto it = by_name.find(label); it != by_name.end()) {
        e.label = it->second;
      } else if (auto idx = parse_int(label);
                 idx && *idx >= 0 && *idx < static_cast<long long>(manifest.class_names.size())) {
        e.label = static_cast<int>(*idx);
      } else {
        throw LoadError(where + ": unknown label \"" + label + "\"");
      }
    } else {
      const auto idx = parse_int(label);
      if (!idx || *idx < 0) throw LoadError(where + ": unknown label \"" + label + "\"");
      e.label = static_cast<int>(*idx);
      max_label = std::max(max_label, e.label);
    }
    if (!seen.insert(e.id).second) throw LoadError(where + ": duplicate id " + e.id);
    const auto img8 = root / "images" / (e.id + ".img8");
    const auto png = root / "images" / (e.id + ".png");
    if (std::filesystem::exists(img8)) {
      e.path = img8;
    } else if (std::filesystem::exists(png)) {
      e.path = png;
    } else {
      throw LoadError("missing image file " + img8.string() + " (or " + png.string() + ")");
    }
    manifest.records.push_back(std::move(e));
  }
  if (!named) {
    for (int c = 0; c <= max_label; ++c) manifest.class_names.push_back(std::to_string(c));
  }
  std::sort(manifest.records.begin(), manifest.records.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  return manifest;
}

std::vector<ImageRecord> load_images(const DatasetManifest& manifest, const PreprocessConfig& cfg) {
  std::vector<ImageRecord> out(manifest.records.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& e = manifest.records[i];
    ImageRecord img = read_image(e.path);
    img.label = e.label;
    img.id = e.id;
    out[i] = preprocess(img, cfg);
  }
  return out;
}

}  // namespace msf
