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
#include <iosfwd>
#include <string>
#include <vector>

#include "msf/data.hpp"
#include "msf/model.hpp"
#include "msf/training.hpp"

namespace msf {

// Everything a train/eval run needs, loaded from a flat "key = value" file.
// One `seed` drives model init, batch shuffling and the split.
struct RunConfig {
  MsfCnnConfig model;
  TrainConfig train;
  SplitSpec split;
  PreprocessConfig preprocess;

  std::uint64_t seed() const noexcept { return train.seed; }
  void set_seed(std::uint64_t seed) noexcept;
};

// Known keys in file order.
const std::vector<std::string>& config_keys();

// Throws ConfigError naming the key on an unknown key or a bad value.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

// Cross-module checks (module invariants, image size vs. preprocessing);
// throws ConfigError naming the offending key.
void validate(const RunConfig& config);

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);
// Every key, one per line; parse_run_config(to_config_text(c)) == c.
std::string to_config_text(const RunConfig& config);

}  // namespace msf
