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
#include <random>

#include "msf/linalg.hpp"

namespace msf {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable per-(base, a, b) stream seed, e.g. (graph seed, epoch, node).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

// Uniform in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng);
Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

}  // namespace msf
