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

#include "msf/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <string>

#include "msf/errors.hpp"
#include "msf/rng.hpp"

namespace msf {

namespace {

constexpr std::size_t kConvLayers = 4;
constexpr std::size_t kKernel = 3;

std::string conv_name(std::size_t i) { return "conv" + std::to_string(i + 1); }
std::string gnn_name(std::size_t l) { return "gnn" + std::to_string(l + 1); }

LayerParams slice(const Params& params, const std::string& prefix) {
  LayerParams out;
  const std::string key = prefix + ".";
  for (auto it = params.lower_bound(key); it != params.end() && it->first.starts_with(key); ++it) {
    out.emplace(it->first.substr(key.size()), it->second);
  }
  return out;
}

void merge(Params& into, const std::string& prefix, const LayerParams& grads) {
  for (const auto& [name, g] : grads) into[prefix + "." + name] = g;
}

Params zeros_like(const Params& params) {
  Params out;
  for (const auto& [name, m] : params) out.emplace(name, Matrix(m.rows(), m.cols()));
  return out;
}

bool pooled_after(const MsfCnnConfig& c, std::size_t layer) {
  return std::find(c.pool_positions.begin(), c.pool_positions.end(), layer) != c.pool_positions.end();
}

// Spatial side length after conv layer `layer` (including its pool).
std::size_t side_after(const MsfCnnConfig& c, std::size_t layer) {
  std::size_t side = c.image_size;
  for (std::size_t i = 0; i <= layer; ++i) {
    if (pooled_after(c, i)) side /= 2;
  }
  return side;
}

std::size_t gnn_in_dim(const MsfCnnConfig& c, std::size_t l) {
  return l == 0 ? c.feature_dim() : c.gnn_hidden;
}

std::size_t head_in_dim(const MsfCnnConfig& c) {
  return c.gnn_layers == 0 ? c.feature_dim() : c.gnn_hidden;
}

GcnLayer gcn_layer(const Params& params, std::size_t l) {
  return {slice(params, gnn_name(l)), Activation::kRelu};
}

GraphSageLayer sage_layer(const MsfCnnModel& model, std::size_t l) {
  GraphSageLayer layer;
  layer.params = slice(model.parameters(), gnn_name(l));
  layer.aggregator = model.config().sage_aggregator;
  layer.sample_size = model.config().sage_sample;
  layer.seed = derive_seed(model.seed(), 0x5a9eULL, l);
  layer.activation = Activation::kRelu;
  return layer;
}

// Tap weights reordered shallow to deep.
std::vector<double> tap_weights(const MsfCnnConfig& c) {
  return {c.fusion_weights.rbegin(), c.fusion_weights.rend()};
}

ImageTrace trace_image(const MsfCnnModel& model, const std::vector<LayerParams>& convs,
                       const FeatureMap& image) {
  const MsfCnnConfig& c = model.config();
  const auto taps = c.tap_layers();
  ImageTrace t;
  FeatureMap x = image;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    t.conv_in.push_back(x);
    t.conv_pre.push_back(conv2d_forward(convs[i], x));
    t.conv_act.push_back(relu_forward(t.conv_pre.back()));
    x = pooled_after(c, i) ? maxpool2d_forward(t.conv_act.back()) : t.conv_act.back();
    if (std::find(taps.begin(), taps.end(), i) != taps.end()) t.taps.push_back(x);
  }
  if (c.scales == 1) {
    t.fused = t.taps[0];
  } else if (c.scales == 2) {
    t.fused = side_fusion_forward(c.fusion_weights[0], t.taps[1], t.taps[0]);
  } else {
    const auto w = tap_weights(c);
    t.fused = weighted_fusion_forward(w, t.taps);
  }
  t.pooled = c.ppm_levels.empty() ? t.fused : pyramid_pooling_forward(t.fused, c.ppm_levels);
  return t;
}

// Conv-stack gradients of <gap(pooled), d_row> for one image.
std::vector<LayerParams> backward_image(const MsfCnnConfig& c, const std::vector<LayerParams>& convs,
                                        const ImageTrace& t, std::span<const double> d_row) {
  const FeatureMap d_pooled = global_average_pool_backward(t.pooled, d_row);
  const FeatureMap d_fused =
      c.ppm_levels.empty()
          ? d_pooled
          : FeatureMap::from_matrix(
                pyramid_pooling_backward(t.fused, c.ppm_levels, d_pooled).input_grad(),
                t.fused.height, t.fused.width);

  std::vector<FeatureMap> d_taps;
  if (c.scales == 1) {
    d_taps.push_back(d_fused);
  } else if (c.scales == 2) {
    const auto r = side_fusion_backward(c.fusion_weights[0], t.taps[1], t.taps[0], d_fused);
    d_taps.push_back(FeatureMap::from_matrix(r.input_grads[1], t.taps[0].height, t.taps[0].width));
    d_taps.push_back(FeatureMap::from_matrix(r.input_grads[0], t.taps[1].height, t.taps[1].width));
  } else {
    const auto w = tap_weights(c);
    d_taps = weighted_fusion_backward(w, t.taps, d_fused);
  }

  const auto taps = c.tap_layers();
  std::vector<FeatureMap> d_out(kConvLayers);
  for (std::size_t j = 0; j < taps.size(); ++j) d_out[taps[j]] = d_taps[j];

  std::vector<LayerParams> grads(kConvLayers);
  for (std::size_t i = kConvLayers; i-- > 0;) {
    const FeatureMap& act = t.conv_act[i];
    if (d_out[i].data.empty()) {
      const std::size_t side = side_after(c, i);
      d_out[i] = FeatureMap(act.channels, side, side);
    }
    const FeatureMap d_act =
        pooled_after(c, i)
            ? FeatureMap::from_matrix(maxpool2d_backward(act, d_out[i]).input_grad(), act.height,
                                      act.width)
            : d_out[i];
    const FeatureMap d_pre = relu_backward(t.conv_pre[i], d_act);
    auto r = conv2d_backward(convs[i], t.conv_in[i], d_pre);
    grads[i] = std::move(r.param_grads);
    if (i > 0) {
      const FeatureMap d_in =
          FeatureMap::from_matrix(r.input_grad(), t.conv_in[i].height, t.conv_in[i].width);
      if (d_out[i - 1].data.empty()) {
        d_out[i - 1] = d_in;
      } else {
        for (std::size_t j = 0; j < d_in.data.size(); ++j) d_out[i - 1].data[j] += d_in.data[j];
      }
    }
  }
  return grads;
}

// Runs fn(i) for every i in [0, n) across OpenMP threads, rethrowing the
// first exception on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(msf_model_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

std::vector<LayerParams> conv_params(const MsfCnnModel& model) {
  std::vector<LayerParams> convs;
  for (std::size_t i = 0; i < kConvLayers; ++i) convs.push_back(slice(model.parameters(), conv_name(i)));
  return convs;
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_le(std::istream& in, int bytes, const char* what) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) {
    throw LoadError(std::string("checkpoint: truncated while reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = bytes; i-- > 0;) v = (v << 8) | b[i];
  return v;
}

}  // namespace

GnnKind parse_gnn_kind(const std::string& name) {
  if (name == "gcn") return GnnKind::kGcn;
  if (name == "graphsage") return GnnKind::kGraphSage;
  throw ContractError("unknown gnn kind '" + name + "' (expected gcn or graphsage)");
}

const char* gnn_kind_name(GnnKind kind) noexcept {
  return kind == GnnKind::kGcn ? "gcn" : "graphsage";
}

void MsfCnnConfig::validate() const {
  if (in_channels == 0) throw ContractError("config: in_channels must be positive");
  if (conv_channels.size() != kConvLayers) {
    throw ContractError("config: conv_channels needs exactly 4 entries, got " +
                        std::to_string(conv_channels.size()));
  }
  for (auto ch : conv_channels) {
    if (ch == 0) throw ContractError("config: conv_channels entries must be positive");
  }
  if (pool_positions.size() != 2 || pool_positions[0] == pool_positions[1] ||
      pool_positions[0] >= kConvLayers || pool_positions[1] >= kConvLayers) {
    throw ContractError("config: pool_positions needs 2 distinct conv indices in [0, 4)");
  }
  if (image_size == 0 || image_size % 4 != 0) {
    throw ShapeError("config: image_size " + std::to_string(image_size) +
                     " must be a positive multiple of 4");
  }
  if (scales == 0 || scales > kConvLayers) throw ContractError("config: scales must lie in [1, 4]");
  if (fusion_weights.size() != scales) {
    throw ContractError("config: fusion_weights has " + std::to_string(fusion_weights.size()) +
                        " entries for " + std::to_string(scales) + " scales");
  }
  double sum = 0.0;
  for (double w : fusion_weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw ContractError("config: fusion weights must lie in [0, 1]");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ContractError("config: fusion_weights must sum to 1");
  const auto taps = tap_layers();
  for (auto t : taps) {
    if (conv_channels[t] != conv_channels[taps.back()]) {
      throw ShapeError("config: fused conv layers must share a channel count (conv" +
                       std::to_string(t + 1) + " has " + std::to_string(conv_channels[t]) + ")");
    }
  }
  for (auto n : ppm_levels) {
    if (n == 0) throw ContractError("config: ppm_levels entries must be positive");
  }
  if (gnn_layers > 0 && gnn_hidden == 0) throw ContractError("config: gnn_hidden must be positive");
  if (gnn == GnnKind::kGraphSage && sage_sample == 0) {
    throw ContractError("config: sage_sample must be positive");
  }
  if (knn_k == 0) throw ContractError("config: knn_k must be positive");
  if (classes < 2) throw ContractError("config: classes must be at least 2");
}

std::vector<std::size_t> MsfCnnConfig::tap_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 1; j <= scales; ++j) out.push_back((kConvLayers * j + scales - 1) / scales - 1);
  return out;
}

std::size_t MsfCnnConfig::feature_dim() const {
  return conv_channels[tap_layers().back()] * (1 + ppm_levels.size());
}

std::size_t MsfCnnConfig::parameter_count() const {
  std::size_t total = 0;
  std::size_t in = in_channels;
  for (auto out : conv_channels) {
    total += out * in * kKernel * kKernel + out;
    in = out;
  }
  for (std::size_t l = 0; l < gnn_layers; ++l) {
    const std::size_t d = gnn_in_dim(*this, l);
    if (gnn == GnnKind::kGcn) {
      total += d * gnn_hidden;
    } else {
      total += 2 * d * gnn_hidden;
      if (sage_aggregator == Aggregator::kPooling) total += d * d + d;
    }
  }
  return total + head_in_dim(*this) * classes + classes;
}

MsfCnnModel::MsfCnnModel(const MsfCnnModel& other)
    : config_(other.config_),
      seed_(other.seed_),
      params_(other.params_),
      version_(other.version_),
      fusion_calls_(other.fusion_calls_.load()) {}

MsfCnnModel& MsfCnnModel::operator=(const MsfCnnModel& other) {
  config_ = other.config_;
  seed_ = other.seed_;
  params_ = other.params_;
  version_ = other.version_ + 1;
  fusion_calls_ = other.fusion_calls_.load();
  return *this;
}

void MsfCnnModel::load_parameters(const Params& params) {
  if (params.size() != params_.size()) {
    throw ShapeError("load_parameters: expected " + std::to_string(params_.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (const auto& [name, m] : params_) {
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("load_parameters: missing '" + name + "'");
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw ShapeError("load_parameters: '" + name + "' is " + it->second.shape_string() +
                       ", expected " + m.shape_string());
    }
  }
  params_ = params;
  ++version_;
}

std::size_t MsfCnnModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, m] : params_) total += m.size();
  return total;
}

MsfCnnModel build_model(const MsfCnnConfig& config, std::uint64_t seed) {
  config.validate();
  MsfCnnModel model;
  model.config_ = config;
  model.seed_ = seed;
  Rng rng(splitmix64(seed));
  std::size_t in = config.in_channels;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    merge(model.params_, conv_name(i), conv2d_init(in, config.conv_channels[i], kKernel, rng));
    in = config.conv_channels[i];
  }
  for (std::size_t l = 0; l < config.gnn_layers; ++l) {
    const std::size_t d = gnn_in_dim(config, l);
    if (config.gnn == GnnKind::kGcn) {
      merge(model.params_, gnn_name(l),
            make_gcn_layer(d, config.gnn_hidden, Activation::kRelu, rng).params);
    } else {
      merge(model.params_, gnn_name(l),
            make_graphsage_layer(d, config.gnn_hidden, config.sage_aggregator, config.sage_sample,
                                 0, Activation::kRelu, rng)
                .params);
    }
  }
  merge(model.params_, "head", dense_init(head_in_dim(config), config.classes, rng));
  return model;
}

FeatureTrace trace_features(const MsfCnnModel& model, std::span<const FeatureMap> batch) {
  const MsfCnnConfig& c = model.config();
  if (batch.empty()) throw ShapeError("extract_features: empty batch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const FeatureMap& img = batch[i];
    if (img.channels != c.in_channels || img.height != c.image_size || img.width != c.image_size) {
      throw ShapeError("extract_features: image " + std::to_string(i) + " is " +
                       std::to_string(img.channels) + "x" + std::to_string(img.height) + "x" +
                       std::to_string(img.width) + ", model expects " +
                       std::to_string(c.in_channels) + "x" + std::to_string(c.image_size) + "x" +
                       std::to_string(c.image_size));
    }
  }
  const auto convs = conv_params(model);
  FeatureTrace out;
  out.images.resize(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) { out.images[i] = trace_image(model, convs, batch[i]); });
  if (c.scales > 1) model.fusion_calls_ += batch.size();
  out.features = Matrix(batch.size(), c.feature_dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Matrix row = global_average_pool(out.images[i].pooled);
    std::copy(row.data().begin(), row.data().end(), out.features.row(i).begin());
  }
  return out;
}

Matrix extract_features(const MsfCnnModel& model, std::span<const FeatureMap> batch) {
  return trace_features(model, batch).features;
}

Params extract_features_backward(const MsfCnnModel& model, const FeatureTrace& trace,
                                 const Matrix& grad_features) {
  if (grad_features.rows() != trace.images.size() ||
      grad_features.cols() != trace.features.cols()) {
    throw ShapeError("extract_features_backward: gradient is " + grad_features.shape_string() +
                     ", features are " + trace.features.shape_string());
  }
  const auto convs = conv_params(model);
  std::vector<std::vector<LayerParams>> per_image(trace.images.size());
  parallel_for(trace.images.size(), [&](std::size_t i) {
    per_image[i] = backward_image(model.config(), convs, trace.images[i], grad_features.row(i));
  });
  Params grads = zeros_like(model.parameters());
  // Summed in image order so the result does not depend on thread count.
  for (const auto& image : per_image) {
    for (std::size_t l = 0; l < kConvLayers; ++l) {
      for (const auto& [name, g] : image[l]) grads.at(conv_name(l) + "." + name) += g;
    }
  }
  return grads;
}

ForwardPass forward(const MsfCnnModel& model, std::span<const FeatureMap> batch, std::size_t epoch) {
  const MsfCnnConfig& c = model.config();
  if (batch.size() < c.knn_k + 1) {
    throw ContractError("forward: batch of " + std::to_string(batch.size()) +
                        " is too small for knn_k=" + std::to_string(c.knn_k));
  }
  ForwardPass pass;
  pass.version = model.version();
  pass.epoch = epoch;
  pass.trace = trace_features(model, batch);
  pass.graph = knn_similarity_graph(pass.trace.features, c.knn_k);
  Matrix h = pass.trace.features;
  if (c.gnn == GnnKind::kGcn && c.gnn_layers > 0) pass.a_norm = normalized_adjacency(pass.graph);
  for (std::size_t l = 0; l < c.gnn_layers; ++l) {
    pass.gnn_inputs.push_back(h);
    h = c.gnn == GnnKind::kGcn ? gcn_forward(gcn_layer(model.parameters(), l), pass.a_norm, h)
                               : graphsage_forward(sage_layer(model, l), pass.graph, h, epoch);
  }
  pass.head_input = h;
  pass.probs = row_softmax(dense_forward(slice(model.parameters(), "head"), h));
  return pass;
}

Params backward(const MsfCnnModel& model, const ForwardPass& pass, const Matrix& labels) {
  return backward_from_logits(model, pass, cross_entropy(pass.probs, labels).logit_grad);
}

Params backward_from_logits(const MsfCnnModel& model, const ForwardPass& pass,
                            const Matrix& grad_logits) {
  if (pass.version != model.version()) {
    throw StaleCacheError("backward: forward pass was computed with parameter version " +
                          std::to_string(pass.version) + ", model is at " +
                          std::to_string(model.version()));
  }
  const MsfCnnConfig& c = model.config();
  const auto head = dense_backward(slice(model.parameters(), "head"), pass.head_input, grad_logits);
  Matrix d_h = head.input_grad();
  Params gnn_grads;
  for (std::size_t l = c.gnn_layers; l-- > 0;) {
    const auto r = c.gnn == GnnKind::kGcn
                       ? gcn_backward(gcn_layer(model.parameters(), l), pass.a_norm,
                                      pass.gnn_inputs[l], d_h)
                       : graphsage_backward(sage_layer(model, l), pass.graph, pass.gnn_inputs[l],
                                            d_h, pass.epoch);
    merge(gnn_grads, gnn_name(l), r.param_grads);
    d_h = r.input_grad();
  }
  Params grads = extract_features_backward(model, pass.trace, d_h);
  merge(grads, "head", head.param_grads);
  for (auto& [name, g] : gnn_grads) grads.at(name) = std::move(g);
  return grads;
}

void write_checkpoint(std::ostream& out, const Params& params) {
  out.write("MSFC", 4);
  put_u32(out, 1);
  for (const auto& [name, m] : params) {
    if (name.size() > 0xffff) throw ContractError("checkpoint: parameter name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw LoadError("checkpoint: write failed");
}

void write_checkpoint(const std::string& path, const Params& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("checkpoint: cannot open '" + path + "' for writing");
  write_checkpoint(out, params);
}

Params read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "MSFC") {
    throw LoadError("checkpoint: bad magic (expected MSFC)");
  }
  const auto version = get_le(in, 4, "version");
  if (version != 1) throw LoadError("checkpoint: unsupported version " + std::to_string(version));
  Params out;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto len = static_cast<std::size_t>(get_le(in, 2, "name length"));
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) {
      throw LoadError("checkpoint: truncated parameter name");
    }
    const auto rows = static_cast<std::size_t>(get_le(in, 4, "rows"));
    const auto cols = static_cast<std::size_t>(get_le(in, 4, "cols"));
    std::vector<double> data(rows * cols);
    for (double& v : data) v = std::bit_cast<double>(get_le(in, 8, ("values of '" + name + "'").c_str()));
    if (!out.emplace(name, Matrix(rows, cols, std::move(data))).second) {
      throw LoadError("checkpoint: duplicate parameter '" + name + "'");
    }
  }
  return out;
}

Params read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("checkpoint: cannot open '" + path + "'");
  return read_checkpoint(in);
}

ImageClassificationTask::ImageClassificationTask(MsfCnnModel model,
                                                 const std::vector<FeatureMap>* images,
                                                 std::vector<int> labels)
    : model_(std::move(model)), images_(images), labels_(std::move(labels)) {
  if (images_ == nullptr || images_->size() != labels_.size()) {
    throw ShapeError("ImageClassificationTask: one label per image required");
  }
}

std::vector<FeatureMap> ImageClassificationTask::gather(std::span<const std::size_t> items) const {
  std::vector<FeatureMap> out;
  out.reserve(items.size());
  for (auto i : items) out.push_back(images_->at(i));
  return out;
}

double ImageClassificationTask::loss_and_gradients(std::span<const std::size_t> batch,
                                                   std::size_t epoch, Params& grads) {
  const auto images = gather(batch);
  std::vector<int> y;
  for (auto i : batch) y.push_back(labels_.at(i));
  const Matrix labels = one_hot(y, model_.config().classes);
  const ForwardPass pass = forward(model_, images, epoch);
  grads = backward(model_, pass, labels);
  return cross_entropy(pass.probs, labels).loss;
}

Matrix ImageClassificationTask::predict(std::span<const std::size_t> items) {
  return forward(model_, gather(items)).probs;
}

}  // namespace msf
