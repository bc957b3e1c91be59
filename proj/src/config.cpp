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

#include "msf/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "msf/errors.hpp"
#include "msf/text.hpp"

namespace msf {

namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected, key);
}

std::size_t to_count(const std::string& key, const std::string& value) {
  const auto v = parse_int(trim(value));
  if (!v || *v < 0) bad_value(key, value, "a non-negative integer");
  return static_cast<std::size_t>(*v);
}

double to_real(const std::string& key, const std::string& value) {
  const auto v = parse_double(trim(value));
  if (!v || !std::isfinite(*v)) bad_value(key, value, "a finite number");
  return *v;
}

bool to_bool(const std::string& key, const std::string& value) {
  const auto v = trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::size_t> to_counts(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  const auto v = trim(value);
  if (v.empty() || v == "none") return out;
  for (const auto& part : split(v, ',')) out.push_back(to_count(key, part));
  return out;
}

std::vector<double> to_reals(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& part : split(trim(value), ',')) out.push_back(to_real(key, part));
  return out;
}

std::string from_counts(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string from_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

#define COUNT_FIELD(key, member)                                                       \
  {key,                                                                                \
   {[](RunConfig& c, const std::string& v) { c.member = to_count(key, v); },           \
    [](const RunConfig& c) { return std::to_string(c.member); }}}
#define REAL_FIELD(key, member)                                                        \
  {key,                                                                                \
   {[](RunConfig& c, const std::string& v) { c.member = to_real(key, v); },            \
    [](const RunConfig& c) { return format_double(c.member); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      COUNT_FIELD("in_channels", model.in_channels),
      {"conv_channels",
       {[](RunConfig& c, const std::string& v) { c.model.conv_channels = to_counts("conv_channels", v); },
        [](const RunConfig& c) { return from_counts(c.model.conv_channels); }}},
      {"pool_positions",
       {[](RunConfig& c, const std::string& v) { c.model.pool_positions = to_counts("pool_positions", v); },
        [](const RunConfig& c) { return from_counts(c.model.pool_positions); }}},
      COUNT_FIELD("scales", model.scales),
      {"fusion_weights",
       {[](RunConfig& c, const std::string& v) { c.model.fusion_weights = to_reals("fusion_weights", v); },
        [](const RunConfig& c) { return from_reals(c.model.fusion_weights); }}},
      {"ppm_levels",
       {[](RunConfig& c, const std::string& v) { c.model.ppm_levels = to_counts("ppm_levels", v); },
        [](const RunConfig& c) { return from_counts(c.model.ppm_levels); }}},
      {"gnn",
       {[](RunConfig& c, const std::string& v) {
          try {
            c.model.gnn = parse_gnn_kind(std::string(trim(v)));
          } catch (const ContractError&) {
            bad_value("gnn", v, "gcn or graphsage");
          }
        },
        [](const RunConfig& c) { return std::string(gnn_kind_name(c.model.gnn)); }}},
      COUNT_FIELD("gnn_layers", model.gnn_layers),
      COUNT_FIELD("gnn_hidden", model.gnn_hidden),
      {"sage_aggregator",
       {[](RunConfig& c, const std::string& v) {
          const auto t = trim(v);
          if (t == "mean") {
            c.model.sage_aggregator = Aggregator::kMean;
          } else if (t == "pooling") {
            c.model.sage_aggregator = Aggregator::kPooling;
          } else {
            bad_value("sage_aggregator", v, "mean or pooling");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.model.sage_aggregator == Aggregator::kMean ? "mean" : "pooling");
        }}},
      COUNT_FIELD("sage_sample", model.sage_sample),
      COUNT_FIELD("knn_k", model.knn_k),
      COUNT_FIELD("classes", model.classes),
      REAL_FIELD("lr_initial", train.lr_initial),
      REAL_FIELD("lr_final", train.lr_final),
      COUNT_FIELD("decay_epoch", train.decay_epoch),
      COUNT_FIELD("epochs", train.epochs),
      COUNT_FIELD("batch_size", train.batch_size),
      {"seed",
       {[](RunConfig& c, const std::string& v) {
          const auto t = std::string(trim(v));
          std::uint64_t seed = 0;
          std::istringstream in(t);
          if (t.empty() || t[0] == '-' || !(in >> seed) || !in.eof()) {
            bad_value("seed", v, "an unsigned 64-bit integer");
          }
          c.set_seed(seed);
        },
        [](const RunConfig& c) { return std::to_string(c.seed()); }}},
      REAL_FIELD("train_fraction", split.train_fraction),
      COUNT_FIELD("folds", split.folds),
      COUNT_FIELD("height", preprocess.height),
      COUNT_FIELD("width", preprocess.width),
      {"equalize",
       {[](RunConfig& c, const std::string& v) { c.preprocess.equalize = to_bool("equalize", v); },
        [](const RunConfig& c) { return std::string(c.preprocess.equalize ? "true" : "false"); }}},
      {"denoise",
       {[](RunConfig& c, const std::string& v) { c.preprocess.denoise = to_bool("denoise", v); },
        [](const RunConfig& c) { return std::string(c.preprocess.denoise ? "true" : "false"); }}},
      COUNT_FIELD("denoise_window", preprocess.denoise_window),
      {"range",
       {[](RunConfig& c, const std::string& v) {
          const auto t = trim(v);
          if (t == "unit") {
            c.preprocess.range = NormalizeRange::kUnit;
          } else if (t == "symmetric") {
            c.preprocess.range = NormalizeRange::kSymmetric;
          } else {
            bad_value("range", v, "unit or symmetric");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.preprocess.range == NormalizeRange::kUnit ? "unit" : "symmetric");
        }}},
  };
  return table;
}

#undef COUNT_FIELD
#undef REAL_FIELD

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'", key);
}

// Runs a module validator and reports its complaint against `key`.
template <typename Fn>
void check(const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + key + "': " + e.what(), key);
  }
}

}  // namespace

void RunConfig::set_seed(std::uint64_t seed) noexcept {
  train.seed = seed;
  split.seed = seed;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, value);
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
  return field(key).get(config);
}

void validate(const RunConfig& c) {
  if (c.preprocess.height != c.preprocess.width) {
    throw ConfigError("config key 'width': images must be square (height " +
                          std::to_string(c.preprocess.height) + ", width " +
                          std::to_string(c.preprocess.width) + ")",
                      "width");
  }
  if (c.preprocess.denoise && c.preprocess.denoise_window % 2 == 0) {
    throw ConfigError("config key 'denoise_window': window must be odd", "denoise_window");
  }
  MsfCnnConfig model = c.model;
  model.image_size = c.preprocess.height;
  check("model", [&] { model.validate(); });
  check("epochs", [&] { c.train.validate(); });
  check("folds", [&] { c.split.validate(); });
  if (c.train.batch_size < c.model.knn_k + 1) {
    throw ConfigError("config key 'batch_size': must be at least knn_k + 1", "batch_size");
  }
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'", "");
    }
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh) {
      throw ConfigError("config key '" + key + "' repeated on line " + std::to_string(line_no), key);
    }
    set_config_value(config, key, value);
  }
  config.model.image_size = config.preprocess.height;
  validate(config);
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config '" + path.string() + "'");
  return parse_run_config(in);
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace msf
