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

// Seeded property runner. Each property draws fresh random instances per
// trial and measures a violation (an error, or 0/1 for yes/no properties)
// against its tolerance.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace msf::test {

struct PropertyResult {
  std::string name;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double worst = 0.0;      // largest violation seen
  double tolerance = 0.0;  // pass iff violation <= tolerance
  std::size_t first_failing_trial = 0;

  bool passed() const noexcept { return failures == 0; }
};

struct PropertyOptions {
  std::size_t trials = 200;
  std::uint64_t seed = 20260101;
};

std::vector<std::string> property_names();

// Runs one named property; throws std::out_of_range for an unknown name.
PropertyResult run_property(const std::string& name, const PropertyOptions& options = {});

std::vector<PropertyResult> run_all_properties(const PropertyOptions& options = {});

// One line per property, e.g. "gcn_permutation_equivariance  25/25  worst 3e-16 <= 1e-10".
std::string describe(const PropertyResult& r);

}  // namespace msf::test
