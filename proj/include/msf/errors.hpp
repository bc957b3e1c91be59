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

#include <stdexcept>
#include <string>

namespace msf {

// Dimension disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Violated precondition that is not a shape problem (asymmetric input,
// alpha outside [0,1], non-one-hot labels, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation produced NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Zero-norm feature row where a cosine similarity is required.
class DegenerateFeatureError : public std::invalid_argument {
 public:
  DegenerateFeatureError(const std::string& what, std::size_t row)
      : std::invalid_argument(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Precision/recall/AP requested where the denominator is empty.
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// File-format or dataset-layout failure; the message names the offender.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& what, std::string key)
      : std::invalid_argument(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Backward called with intermediates from a different parameter version.
class StaleCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace msf
