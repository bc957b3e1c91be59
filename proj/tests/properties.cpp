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

#include "properties.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "msf/data.hpp"
#include "msf/gnn.hpp"
#include "msf/kernels.hpp"
#include "msf/metrics.hpp"
#include "msf/training.hpp"
#include "support.hpp"

namespace msf::test {

namespace {

// Violation measured on one random instance.
using Measure = std::function<double(Rng&, std::size_t trial)>;

struct Property {
  double tolerance;
  Measure measure;
  std::size_t fixed_trials = 0;  // nonzero: ignore PropertyOptions::trials
};

std::uniform_int_distribution<std::size_t> range(std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi);
}

double relative(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

double indicator(bool ok) { return ok ? 0.0 : 1.0; }

Matrix random_features(const Graph& g, std::size_t d, Rng& rng) {
  return random_matrix(g.node_count(), d, rng);
}

// Circulant graph: each node joined to the k/2 nearest on either side (k even).
Graph circulant(std::size_t n, std::size_t k) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 1; s <= k / 2; ++s) {
      const std::size_t j = (i + s) % n;
      edges.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  return Graph(n, std::move(edges));
}

Graph perfect_matching(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; i += 2) edges.emplace_back(i, i + 1);
  return Graph(n, std::move(edges));
}

std::size_t component_count(const Graph& g) {
  std::vector<bool> seen(g.node_count(), false);
  std::size_t count = 0;
  for (std::size_t s = 0; s < g.node_count(); ++s) {
    if (seen[s]) continue;
    ++count;
    std::vector<std::size_t> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t u : g.neighbors(v)) {
        if (!seen[u]) {
          seen[u] = true;
          stack.push_back(u);
        }
      }
    }
  }
  return count;
}

// Random raw image; one trial in five is a constant image.
ImageRecord random_raw_image(Rng& rng) {
  ImageRecord img;
  img.channels = std::bernoulli_distribution(0.5)(rng) ? 1 : 3;
  img.height = range(3, 40)(rng);
  img.width = range(3, 40)(rng);
  img.pixels.resize(img.channels * img.height * img.width);
  if (range(0, 4)(rng) == 0) {
    std::fill(img.pixels.begin(), img.pixels.end(), static_cast<double>(range(0, 255)(rng)));
  } else {
    const std::size_t lo = range(0, 200)(rng);
    auto px = range(lo, std::min<std::size_t>(255, lo + range(1, 255)(rng)));
    for (double& v : img.pixels) v = static_cast<double>(px(rng));
  }
  return img;
}

bool is_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                  std::size_t n) {
  std::vector<int> hits(n, 0);
  for (std::size_t i : a) {
    if (i >= n) return false;
    ++hits[i];
  }
  for (std::size_t i : b) {
    if (i >= n) return false;
    ++hits[i];
  }
  return std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
}

const std::map<std::string, Property>& registry() {
  static const std::map<std::string, Property> props = {
      // ---- linear algebra --------------------------------------------------
      {"matmul_associativity",
       {1e-9,
        [](Rng& rng, std::size_t) {
          auto dim = range(1, 12);
          const std::size_t m = dim(rng), k = dim(rng), l = dim(rng), n = dim(rng);
          const Matrix a = random_matrix(m, k, rng), b = random_matrix(k, l, rng),
                       c = random_matrix(l, n, rng);
          const Matrix left = matmul(matmul(a, b), c);
          const Matrix right = matmul(a, matmul(b, c));
          return max_abs_diff(left, right) / std::max(1.0, max_abs(right));
        }}},
      {"transpose_involution",
       {0.0,
        [](Rng& rng, std::size_t) {
          const Matrix m = random_matrix(range(1, 20)(rng), range(1, 20)(rng), rng, -1e6, 1e6);
          return indicator(transpose(transpose(m)).data() == m.data());
        }}},
      {"softmax_row_sums",
       {1e-12,
        [](Rng& rng, std::size_t trial) {
          // Every other trial spreads a row over at least 700.
          const double spread = trial % 2 ? 800.0 : 10.0;
          Matrix m = random_matrix(range(1, 10)(rng), range(2, 12)(rng), rng, -spread, spread);
          if (trial % 2) {
            m(0, 0) = -spread;
            m(0, 1) = spread;
          }
          const Matrix p = row_softmax(m);
          double worst = 0.0;
          for (std::size_t i = 0; i < p.rows(); ++i) {
            const auto row = p.row(i);
            worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
          }
          return worst;
        }}},
      {"eigen_trace",
       {1e-9,
        [](Rng& rng, std::size_t) {
          const Matrix a = random_symmetric(range(1, 20)(rng), rng);
          const auto e = symmetric_eigen(a);
          return relative(std::accumulate(e.eigenvalues.begin(), e.eigenvalues.end(), 0.0),
                          trace(a));
        }}},
      {"eigen_reconstruction",
       {1e-8,
        [](Rng& rng, std::size_t) {
          const Matrix a = random_symmetric(range(1, 20)(rng), rng);
          const auto e = symmetric_eigen(a);
          Matrix lambda(a.rows(), a.rows());
          for (std::size_t i = 0; i < a.rows(); ++i) lambda(i, i) = e.eigenvalues[i];
          return frobenius_norm(
              triple_loop(triple_loop(e.eigenvectors, lambda), transpose(e.eigenvectors)) - a);
        }}},

      // ---- graphs ----------------------------------------------------------
      {"laplacian_zero_row_sums",
       {0.0,
        [](Rng& rng, std::size_t) {
          const Graph g = random_graph(range(1, 40)(rng), 0.2, rng);
          const Matrix l = laplacian(g);
          double worst = 0.0;
          for (std::size_t i = 0; i < l.rows(); ++i) {
            const auto row = l.row(i);
            worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0)));
          }
          return worst;
        }}},
      {"laplacian_psd",
       {1e-10,
        [](Rng& rng, std::size_t) {
          const Graph g = random_graph(range(2, 30)(rng), 0.15, rng);
          const auto e = symmetric_eigen(laplacian(g));
          return std::max(0.0, -e.eigenvalues.front());
        }}},
      {"laplacian_nullity_is_component_count",
       {0.0,
        [](Rng& rng, std::size_t) {
          const Graph g = random_graph(range(2, 30)(rng), 0.08, rng);
          const auto e = symmetric_eigen(laplacian(g));
          const auto zeros = static_cast<std::size_t>(std::count_if(
              e.eigenvalues.begin(), e.eigenvalues.end(), [](double x) { return x < 1e-9; }));
          return indicator(zeros == component_count(g));
        }}},
      {"normalized_adjacency_symmetric",
       {0.0,
        [](Rng& rng, std::size_t) {
          const Matrix a = normalized_adjacency(random_graph(range(1, 40)(rng), 0.2, rng));
          return indicator(transpose(a).data() == a.data());
        }}},
      {"normalized_adjacency_spectrum",
       {1e-10,
        [](Rng& rng, std::size_t) {
          const auto e =
              symmetric_eigen(normalized_adjacency(random_graph(range(1, 30)(rng), 0.2, rng)));
          return std::max({0.0, e.eigenvalues.back() - 1.0, -1.0 - e.eigenvalues.front()});
        }}},
      {"knn_graph_selection_and_degree",
       {0.0,
        [](Rng& rng, std::size_t) {
          const std::size_t n = range(3, 30)(rng);
          const std::size_t k = range(1, std::min<std::size_t>(n - 1, 5))(rng);
          const Matrix f = random_matrix(n, range(2, 6)(rng), rng);
          const Graph g = knn_similarity_graph(f, k);
          const Matrix sim = kernels::serial::cosine_similarity(f);
          bool ok = true;
          for (std::size_t v = 0; v < n; ++v) {
            const auto picks = knn_selection(sim, v, k);
            ok = ok && picks.size() == k && g.degree(v) >= k;
            for (std::size_t u : picks) ok = ok && g.has_edge(u, v);
          }
          return indicator(ok);
        }}},

      // ---- graph layers ----------------------------------------------------
      {"gcn_permutation_equivariance",
       {1e-10,
        [](Rng& rng, std::size_t) {
          const Graph g = random_graph(range(2, 30)(rng), 0.2, rng);
          const Matrix h = random_features(g, range(1, 6)(rng), rng);
          const GcnLayer layer = make_gcn_layer(h.cols(), range(1, 6)(rng), Activation::kRelu, rng);
          const auto perm = random_permutation(g.node_count(), rng);
          return max_abs_diff(gcn_forward(layer, relabel(g, perm), permute_rows(h, perm)),
                              permute_rows(gcn_forward(layer, g, h), perm));
        }}},
      {"nn4g_permutation_equivariance",
       {1e-10,
        [](Rng& rng, std::size_t) {
          const Graph g = random_graph(range(2, 30)(rng), 0.2, rng);
          const Matrix x = random_features(g, range(1, 5)(rng), rng);
          const Matrix h = random_features(g, range(1, 5)(rng), rng);
          const Nn4gLayer layer =
              make_nn4g_layer(x.cols(), h.cols(), range(1, 5)(rng), Activation::kSigmoid, rng);
          const auto perm = random_permutation(g.node_count(), rng);
          return max_abs_diff(
              nn4g_forward(layer, relabel(g, perm), permute_rows(x, perm), permute_rows(h, perm)),
              permute_rows(nn4g_forward(layer, g, x, h), perm));
        }}},
      {"graphsage_permutation_equivariance",
       {1e-10,
        [](Rng& rng, std::size_t trial) {
          const Graph g = random_graph(range(2, 25)(rng), 0.2, rng);
          const Matrix h = random_features(g, range(1, 5)(rng), rng);
          // Full neighbourhoods, so sampling cannot break the symmetry.
          const auto agg = trial % 2 ? Aggregator::kPooling : Aggregator::kMean;
          const GraphSageLayer layer =
              make_graphsage_layer(h.cols(), range(1, 5)(rng), agg, std::max<std::size_t>(1, g.max_degree()),
                                   rng(), Activation::kRelu, rng);
          const auto perm = random_permutation(g.node_count(), rng);
          return max_abs_diff(graphsage_forward(layer, relabel(g, perm), permute_rows(h, perm)),
                              permute_rows(graphsage_forward(layer, g, h), perm));
        }}},
      {"graphsage_aggregator_order_invariance",
       {0.0,
        [](Rng& rng, std::size_t trial) {
          const std::size_t n = range(2, 30)(rng);
          const Matrix h = random_matrix(n, range(1, 6)(rng), rng, -1e3, 1e3);
          const auto agg = trial % 2 ? Aggregator::kPooling : Aggregator::kMean;
          const GraphSageLayer layer =
              make_graphsage_layer(h.cols(), 3, agg, 4, 0, Activation::kRelu, rng);
          auto nbrs = random_permutation(n, rng);
          nbrs.resize(range(1, n)(rng));
          const Matrix before = aggregate_neighbors(layer, h, nbrs);
          std::shuffle(nbrs.begin(), nbrs.end(), rng);
          return indicator(aggregate_neighbors(layer, h, nbrs).data() == before.data());
        }}},
      {"gcn_propagation_norm_bound",
       {1e-12,
        [](Rng& rng, std::size_t) {
          // Spectral radius <= 1 bounds the Frobenius norm, column by column.
          const Graph g = random_graph(range(1, 30)(rng), 0.2, rng);
          const Matrix h = random_features(g, range(1, 6)(rng), rng);
          return std::max(0.0, frobenius_norm(matmul(normalized_adjacency(g), h)) -
                                   frobenius_norm(h));
        }}},
      {"nn4g_k_regular_scaling",
       {1e-12,
        [](Rng& rng, std::size_t) {
          const std::size_t k = 2 * range(1, 3)(rng);
          const std::size_t n = 2 * range(k / 2 + 1, 10)(rng);
          const std::size_t d = range(1, 4)(rng);
          Nn4gLayer layer = make_nn4g_layer(d, d, range(1, 4)(rng), Activation::kIdentity, rng);
          layer.params["theta_self"] = Matrix(d, layer.params["theta_self"].cols());
          // Identical neighbour states isolate the unnormalized sum.
          const Matrix r = random_matrix(1, d, rng);
          Matrix h(n, d);
          for (std::size_t i = 0; i < n; ++i) std::copy(r.data().begin(), r.data().end(), h.row(i).begin());
          const Matrix x = random_matrix(n, d, rng);
          const Matrix regular = nn4g_forward(layer, circulant(n, k), x, h);
          const Matrix single = nn4g_forward(layer, perfect_matching(n), x, h);
          return max_abs_diff(regular, static_cast<double>(k) * single) /
                 std::max(1.0, max_abs(regular));
        }}},

      // ---- dense layers ----------------------------------------------------
      {"attention_row_sums",
       {1e-12,
        [](Rng& rng, std::size_t) {
          const std::size_t heads = range(1, 4)(rng);
          const std::size_t d_model = heads * range(1, 4)(rng);
          const std::size_t dq = range(1, 6)(rng), dk = range(1, 6)(rng);
          const LayerParams p = attention_init(dq, dk, range(1, 6)(rng), d_model, 3, rng);
          const Matrix q = random_matrix(range(1, 8)(rng), dq, rng, -5.0, 5.0);
          const Matrix kk = random_matrix(range(1, 8)(rng), dk, rng, -5.0, 5.0);
          double worst = 0.0;
          for (const Matrix& w : attention_weights(p, q, kk, heads)) {
            for (std::size_t i = 0; i < w.rows(); ++i) {
              const auto row = w.row(i);
              worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
            }
          }
          return worst;
        }}},
      {"side_fusion_endpoints",
       {0.0,
        [](Rng& rng, std::size_t) {
          const std::size_t c = range(1, 4)(rng), h = range(1, 6)(rng), w = range(1, 6)(rng);
          const std::size_t f = range(1, 3)(rng);
          const FeatureMap deep = random_feature_map(c, h, w, rng);
          const FeatureMap shallow = random_feature_map(c, h * f, w * f, rng);
          const bool ok = side_fusion_forward(0.0, deep, shallow) == shallow &&
                          side_fusion_forward(1.0, deep, shallow) ==
                              upsample_nearest(deep, h * f, w * f);
          return indicator(ok);
        }}},
      {"pyramid_pooling_shape",
       {0.0,
        [](Rng& rng, std::size_t) {
          const std::size_t c = range(1, 4)(rng), h = range(1, 12)(rng), w = range(1, 12)(rng);
          std::vector<std::size_t> levels(range(1, 3)(rng));
          for (auto& l : levels) l = range(1, std::min(h, w))(rng);
          const FeatureMap out = pyramid_pooling_forward(random_feature_map(c, h, w, rng), levels);
          return indicator(out.channels == c * (1 + levels.size()) && out.height == h &&
                           out.width == w);
        }}},

      // ---- training --------------------------------------------------------
      {"cross_entropy_nonnegative",
       {0.0,
        [](Rng& rng, std::size_t) {
          const std::size_t n = range(1, 10)(rng), k = range(2, 5)(rng);
          const Matrix p = row_softmax(random_matrix(n, k, rng, -20.0, 20.0));
          std::vector<int> labels(n);
          for (int& l : labels) l = static_cast<int>(range(0, k - 1)(rng));
          return std::max(0.0, -cross_entropy(p, one_hot(labels, k)).loss);
        }}},
      {"split_partition",
       {0.0,
        [](Rng& rng, std::size_t trial) {
          const std::size_t n = 10 + trial;
          std::vector<int> labels(n);
          for (int& l : labels) l = static_cast<int>(range(0, 2)(rng));
          SplitSpec spec;
          spec.seed = rng();
          const Split s = split(labels, spec);
          return indicator(is_partition(s.train, s.test, n));
        },
        991}},
      {"k_fold_partition",
       {0.0,
        [](Rng& rng, std::size_t trial) {
          const std::size_t n = 10 + trial;
          std::vector<std::size_t> items(n);
          std::iota(items.begin(), items.end(), std::size_t{0});
          std::shuffle(items.begin(), items.end(), rng);
          const auto folds = k_fold(items, 5, rng());
          std::vector<std::size_t> validation;
          std::size_t smallest = n, largest = 0;
          bool ok = folds.size() == 5;
          for (const Fold& f : folds) {
            ok = ok && is_partition(f.fit, f.validation, n);
            validation.insert(validation.end(), f.validation.begin(), f.validation.end());
            smallest = std::min(smallest, f.validation.size());
            largest = std::max(largest, f.validation.size());
          }
          ok = ok && is_partition(validation, {}, n) && largest - smallest <= 1;
          return indicator(ok);
        },
        991}},

      // ---- metrics ---------------------------------------------------------
      {"ap_monotone_invariance",
       {1e-12,
        [](Rng& rng, std::size_t) {
          const std::size_t n = range(1, 60)(rng);
          std::vector<double> scores(n);
          std::vector<bool> pos(n);
          // Coarse scores so ties are common.
          for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(range(0, 9)(rng)) / 10.0;
            pos[i] = std::bernoulli_distribution(0.4)(rng);
          }
          pos[0] = true;
          std::vector<double> moved(n);
          std::transform(scores.begin(), scores.end(), moved.begin(),
                         [](double s) { return std::exp(3.0 * s) - 7.0; });
          return std::abs(average_precision(scores, pos) - average_precision(moved, pos));
        }}},
      {"metrics_in_unit_interval",
       {0.0,
        [](Rng& rng, std::size_t) {
          const std::size_t n = range(1, 40)(rng), k = range(2, 4)(rng);
          const Matrix p = row_softmax(random_matrix(n, k, rng, -3.0, 3.0));
          std::vector<int> labels(n);
          for (int& l : labels) l = static_cast<int>(range(0, k - 1)(rng));
          const auto r = evaluate(p, labels, std::vector<std::string>(k, "c"));
          auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
          bool ok = in_unit(r.macro_precision) && in_unit(r.macro_recall) && in_unit(r.map) &&
                    in_unit(r.accuracy);
          for (const auto* series : {&r.precision, &r.recall, &r.ap}) {
            for (const auto& v : *series) ok = ok && (!v || in_unit(*v));
          }
          return indicator(ok);
        }}},

      // ---- data ------------------------------------------------------------
      {"preprocessing_range",
       {0.0,
        [](Rng& rng, std::size_t trial) {
          PreprocessConfig cfg;
          cfg.height = range(2, 40)(rng);
          cfg.width = range(2, 40)(rng);
          cfg.equalize = std::bernoulli_distribution(0.8)(rng);
          cfg.denoise = std::bernoulli_distribution(0.8)(rng);
          cfg.range = trial % 2 ? NormalizeRange::kSymmetric : NormalizeRange::kUnit;
          const ImageRecord out = preprocess(random_raw_image(rng), cfg);
          const double lo = cfg.range == NormalizeRange::kUnit ? 0.0 : -1.0;
          bool ok = out.height == cfg.height && out.width == cfg.width;
          for (double v : out.pixels) ok = ok && v >= lo && v <= 1.0;
          return indicator(ok);
        }}},
  };
  return props;
}

std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : name) h = (h ^ ch) * 1099511628211ULL;
  return h;
}

}  // namespace

std::vector<std::string> property_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

PropertyResult run_property(const std::string& name, const PropertyOptions& options) {
  const Property& p = registry().at(name);
  PropertyResult r;
  r.name = name;
  r.tolerance = p.tolerance;
  r.trials = p.fixed_trials ? p.fixed_trials : options.trials;
  for (std::size_t t = 0; t < r.trials; ++t) {
    Rng rng(derive_seed(options.seed, name_hash(name), t));
    double v = std::numeric_limits<double>::infinity();
    try {
      v = p.measure(rng, t);
    } catch (const std::exception&) {
      // A throw on a valid instance is a violation like any other.
    }
    // NaN counts as a violation.
    if (!(v <= p.tolerance)) {
      if (r.failures++ == 0) r.first_failing_trial = t;
    }
    if (std::isnan(v) || v > r.worst) r.worst = v;
  }
  return r;
}

std::vector<PropertyResult> run_all_properties(const PropertyOptions& options) {
  std::vector<PropertyResult> out;
  for (const auto& name : property_names()) out.push_back(run_property(name, options));
  return out;
}

std::string describe(const PropertyResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-40s %4zu/%-4zu worst %.3g <= %.3g", r.name.c_str(),
                r.trials - r.failures, r.trials, r.worst, r.tolerance);
  std::string s = buf;
  if (!r.passed()) s += "  (first failure: trial " + std::to_string(r.first_failing_trial) + ")";
  return s;
}

}  // namespace msf::test
