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
#include <stdexcept>
#include <string>
#include <vector>

#include "msf/layers.hpp"

namespace msf {

inline constexpr double kLayerGradTolerance = 1e-4;
inline constexpr double kModelGradTolerance = 1e-3;

struct AuditEntry {
  std::string name;
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  std::string worst;
  double threshold = 0.0;

  bool pass() const noexcept { return max_rel_error <= threshold; }
};

// A perturbed forward changed a ReLU sign, max-pool winner or kNN edge, so
// central differences straddle a kink.
class KinkCrossedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Check names in run order; "msf" is the end-to-end model check.
const std::vector<std::string>& audit_names();

// The gradient-check instance for `name` built from `seed`. The "msf" case
// throws KinkCrossedError from its forward when a perturbation crosses a kink;
// run_gradient_audit then redraws the instance.
GradCheckCase audit_case(const std::string& name, std::uint64_t seed);

struct AuditOptions {
  std::string scope = "all";  // "all" or one of audit_names()
  std::size_t seeds = 5;
  std::uint64_t first_seed = 0;
  // Name of a check whose analytic gradient is deliberately corrupted.
  std::string inject_fault;
};

// Throws ContractError on an unknown scope.
std::vector<AuditEntry> run_gradient_audit(const AuditOptions& options);

// {"checks":[...],"pass":bool}
std::string audit_to_json(const std::vector<AuditEntry>& entries);

}  // namespace msf
