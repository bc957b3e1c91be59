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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msf/audit.hpp"
#include "msf/errors.hpp"
#include "msf/layers.hpp"
#include "support.hpp"

using namespace msf;

namespace {

GradCheckCase dense_case(const LayerParams& params, Matrix x) {
  GradCheckCase c;
  c.name = "dense";
  c.params = params;
  c.inputs = {std::move(x)};
  c.forward = [](const LayerParams& p, const std::vector<Matrix>& in) {
    return dense_forward(p, in[0]);
  };
  c.backward = [](const LayerParams& p, const std::vector<Matrix>& in, const Matrix& g) {
    return dense_backward(p, in[0], g);
  };
  return c;
}

FeatureMap constant_map(std::size_t c, std::size_t h, std::size_t w, double v) {
  return FeatureMap(c, h, w, v);
}

}  // namespace

// ---- dense ------------------------------------------------------------------

TEST_CASE("dense with identity weights and zero bias is the identity") {
  const LayerParams p{{"W", Matrix::identity(3)}, {"b", Matrix(1, 3)}};
  const Matrix x{{1, -2, 3}, {4, 5, -6}};
  CHECK(dense_forward(p, x) == x);
}

TEST_CASE("dense weight gradient is the outer product of input and upstream") {
  const LayerParams p{{"W", Matrix{{0.3, -0.1}, {0.2, 0.7}}}, {"b", Matrix(1, 2)}};
  const BackwardResult r = dense_backward(p, Matrix{{1, 1}}, Matrix{{1, 1}});
  CHECK(r.param_grads.at("W") == Matrix{{1, 1}, {1, 1}});
  CHECK(r.param_grads.at("b") == Matrix{{1, 1}});
}

TEST_CASE("dense rejects mismatched input width") {
  Rng rng(0);
  const LayerParams p = dense_init(3, 2, rng);
  CHECK_THROWS_AS(dense_forward(p, Matrix(2, 4)), ShapeError);
}

TEST_CASE("initialization is Glorot uniform and seeded") {
  Rng a(7), b(7);
  const LayerParams pa = dense_init(30, 20, a);
  const LayerParams pb = dense_init(30, 20, b);
  CHECK(pa == pb);
  const double limit = std::sqrt(6.0 / 50.0);
  CHECK(max_abs(pa.at("W")) <= limit);
  CHECK(max_abs(pa.at("W")) > 0.8 * limit);
}

// ---- activations -------------------------------------------------------------

TEST_CASE("relu and sigmoid values") {
  CHECK(relu_forward(Matrix{{-1, 0, 2}}) == Matrix{{0, 0, 2}});
  CHECK(sigmoid_forward(Matrix{{0}})(0, 0) == 0.5);
  CHECK(relu_backward(Matrix{{-1, 0, 2}}, Matrix{{5, 5, 5}}) == Matrix{{0, 0, 5}});
}

TEST_CASE("activation gradients match finite differences away from the kink") {
  Rng rng(1);
  Matrix x = test::random_matrix(4, 5, rng);
  for (double& v : x.data()) {
    if (std::abs(v) <= 1e-3) v = 0.5;
  }
  for (Activation a : {Activation::kRelu, Activation::kSigmoid, Activation::kIdentity}) {
    GradCheckCase c;
    c.inputs = {x};
    c.forward = [a](const LayerParams&, const std::vector<Matrix>& in) {
      return activation_forward(a, in[0]);
    };
    c.backward = [a](const LayerParams&, const std::vector<Matrix>& in, const Matrix& g) {
      return BackwardResult({activation_backward(a, in[0], g)}, {}, in, {});
    };
    CHECK(grad_check(c).max_rel_error <= 1e-4);
  }
  CHECK(parse_activation("relu") == Activation::kRelu);
  CHECK(std::string(activation_name(Activation::kSigmoid)) == "sigmoid");
  CHECK_THROWS(parse_activation("tanh"));
}

// ---- conv2d -------------------------------------------------------------------

TEST_CASE("conv2d with a centre-one kernel copies the input") {
  Matrix w(1, 9);
  w(0, 4) = 1.0;
  const LayerParams p{{"W", w}, {"b", Matrix(1, 1)}};
  Rng rng(2);
  const FeatureMap x = test::random_feature_map(1, 5, 6, rng);
  CHECK(conv2d_forward(p, x) == x);
}

TEST_CASE("conv2d with an all-ones kernel sums the neighbourhood") {
  const LayerParams p{{"W", Matrix(1, 9, 1.0)}, {"b", Matrix(1, 1)}};
  const FeatureMap y = conv2d_forward(p, constant_map(1, 5, 5, 2.0));
  for (std::size_t r = 1; r < 4; ++r) {
    for (std::size_t c = 1; c < 4; ++c) CHECK(y.at(0, r, c) == 18.0);
  }
  CHECK(y.at(0, 0, 0) == 8.0);
  CHECK(y.at(0, 0, 2) == 12.0);
}

TEST_CASE("conv2d rejects a channel mismatch") {
  Rng rng(3);
  const LayerParams p = conv2d_init(2, 3, 3, rng);
  CHECK_THROWS_AS(conv2d_forward(p, FeatureMap(1, 4, 4)), ShapeError);
}

// ---- max pooling ----------------------------------------------------------------

TEST_CASE("maxpool picks the window maximum") {
  const FeatureMap x(1, 2, 2, {1, 2, 3, 4});
  CHECK(maxpool2d_forward(x).data == std::vector<double>{4});
}

TEST_CASE("maxpool ties route to the top-left of each window") {
  const FeatureMap x = constant_map(1, 4, 4, 3.0);
  CHECK(maxpool2d_forward(x) == constant_map(1, 2, 2, 3.0));
  const BackwardResult r = maxpool2d_backward(x, constant_map(1, 2, 2, 1.0));
  const FeatureMap g = FeatureMap::from_matrix(r.input_grad(), 4, 4);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t xx = 0; xx < 4; ++xx) {
      CHECK(g.at(0, y, xx) == ((y % 2 == 0 && xx % 2 == 0) ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("maxpool rejects indivisible sizes") {
  CHECK_THROWS_AS(maxpool2d_forward(FeatureMap(1, 3, 4)), ShapeError);
}

// ---- attention ----------------------------------------------------------------------

TEST_CASE("attention over a single key returns its value") {
  const LayerParams p{{"WQ", Matrix::identity(2)},
                      {"WK", Matrix::identity(2)},
                      {"WV", Matrix::identity(2)},
                      {"WO", Matrix::identity(2)}};
  const Matrix q{{0.3, -1.0}, {2.0, 0.5}};
  const Matrix out = multihead_attention_forward(p, q, Matrix{{1, 1}}, Matrix{{4, -5}}, 1);
  CHECK(out == Matrix{{4, -5}, {4, -5}});
}

TEST_CASE("attention is invariant to the key/value row order") {
  Rng rng(4);
  const LayerParams p = attention_init(3, 3, 3, 4, 3, rng);
  const Matrix q = test::random_matrix(2, 3, rng);
  const Matrix k = test::random_matrix(5, 3, rng);
  const Matrix v = test::random_matrix(5, 3, rng);
  const auto perm = test::random_permutation(5, rng);
  const Matrix a = multihead_attention_forward(p, q, k, v, 2);
  const Matrix b =
      multihead_attention_forward(p, q, test::permute_rows(k, perm), test::permute_rows(v, perm), 2);
  CHECK(test::max_abs_diff(a, b) <= 1e-12);
}

TEST_CASE("attention weights are row-stochastic per head") {
  Rng rng(5);
  const LayerParams p = attention_init(4, 4, 4, 6, 4, rng);
  const auto w = attention_weights(p, test::random_matrix(3, 4, rng), test::random_matrix(7, 4, rng), 3);
  CHECK(w.size() == 3);
  for (const Matrix& m : w) {
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 7);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double s = 0.0;
      for (double v : m.row(r)) s += v;
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("one head with identity output projection is scaled dot-product attention") {
  Rng rng(6);
  LayerParams p = attention_init(3, 3, 3, 3, 3, rng);
  p["WO"] = Matrix::identity(3);
  const Matrix q = test::random_matrix(2, 3, rng);
  const Matrix k = test::random_matrix(4, 3, rng);
  const Matrix v = test::random_matrix(4, 3, rng);
  const Matrix qp = matmul(q, p.at("WQ"));
  const Matrix kp = matmul(k, p.at("WK"));
  const Matrix vp = matmul(v, p.at("WV"));
  const Matrix expected = matmul(row_softmax((1.0 / std::sqrt(3.0)) * matmul_nt(qp, kp)), vp);
  CHECK(test::max_abs_diff(multihead_attention_forward(p, q, k, v, 1), expected) <= 1e-12);
}

TEST_CASE("attention rejects an indivisible head count") {
  Rng rng(7);
  const LayerParams p = attention_init(3, 3, 3, 4, 3, rng);
  const Matrix x = test::random_matrix(2, 3, rng);
  CHECK_THROWS_AS(multihead_attention_forward(p, x, x, x, 3), ShapeError);
}

// ---- fusion -----------------------------------------------------------------------------

TEST_CASE("side fusion with the default weight") {
  const FeatureMap f =
      side_fusion_forward(0.6, constant_map(2, 3, 3, 1.0), constant_map(2, 3, 3, 0.0));
  for (double v : f.data) CHECK(v == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("side fusion endpoints are bit-exact") {
  Rng rng(8);
  const FeatureMap deep = test::random_feature_map(2, 4, 4, rng);
  const FeatureMap shallow = test::random_feature_map(2, 4, 4, rng);
  CHECK(side_fusion_forward(1.0, deep, shallow) == deep);
  CHECK(side_fusion_forward(0.0, deep, shallow) == shallow);
}

TEST_CASE("side fusion upsamples a smaller deep map") {
  const FeatureMap deep(1, 1, 2, {1, 2});
  const FeatureMap shallow = constant_map(1, 2, 4, 0.0);
  const FeatureMap f = side_fusion_forward(0.5, deep, shallow);
  CHECK(f.data == std::vector<double>{0.5, 0.5, 1, 1, 0.5, 0.5, 1, 1});
  const BackwardResult r = side_fusion_backward(0.5, deep, shallow, constant_map(1, 2, 4, 1.0));
  CHECK(r.input_grads[0] == Matrix{{2, 2}});
  CHECK(r.input_grads[1] == Matrix(1, 8, 0.5));
}

TEST_CASE("side fusion is linear in its inputs") {
  Rng rng(9);
  const FeatureMap deep = test::random_feature_map(2, 4, 4, rng);
  const FeatureMap shallow = test::random_feature_map(2, 4, 4, rng);
  FeatureMap deep2 = deep, shallow2 = shallow;
  for (double& v : deep2.data) v *= 2;
  for (double& v : shallow2.data) v *= 2;
  const FeatureMap a = side_fusion_forward(0.6, deep, shallow);
  const FeatureMap b = side_fusion_forward(0.6, deep2, shallow2);
  for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(b.data[i] - 2 * a.data[i]) <= 1e-15);
}

TEST_CASE("side fusion rejects bad weights and shapes") {
  CHECK_THROWS_AS(side_fusion_forward(1.5, FeatureMap(1, 2, 2), FeatureMap(1, 2, 2)), ContractError);
  CHECK_THROWS_AS(side_fusion_forward(-0.1, FeatureMap(1, 2, 2), FeatureMap(1, 2, 2)), ContractError);
  CHECK_THROWS_AS(side_fusion_forward(0.5, FeatureMap(2, 2, 2), FeatureMap(1, 2, 2)), ShapeError);
}

TEST_CASE("weighted fusion of two maps equals side fusion") {
  Rng rng(10);
  const FeatureMap deep = test::random_feature_map(3, 2, 2, rng);
  const FeatureMap shallow = test::random_feature_map(3, 4, 4, rng);
  const double w[] = {0.4, 0.6};  // shallow, deep
  const FeatureMap maps[] = {shallow, deep};
  const FeatureMap a = weighted_fusion_forward(w, maps);
  const FeatureMap b = side_fusion_forward(0.6, deep, shallow);
  for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) <= 1e-15);
}

// ---- pyramid pooling and GAP ---------------------------------------------------------------

TEST_CASE("pyramid pooling of a constant image appends that constant") {
  const FeatureMap y = pyramid_pooling_forward(constant_map(2, 4, 4, 3.5), std::vector<std::size_t>{1});
  CHECK(y.channels == 4);
  for (double v : y.data) CHECK(v == 3.5);
}

TEST_CASE("pyramid pooling channel count and spatial size") {
  Rng rng(11);
  const FeatureMap y =
      pyramid_pooling_forward(test::random_feature_map(4, 6, 5, rng), std::vector<std::size_t>{1, 2});
  CHECK(y.channels == 12);
  CHECK(y.height == 6);
  CHECK(y.width == 5);
  CHECK_THROWS_AS(pyramid_pooling_forward(FeatureMap(1, 2, 2), std::vector<std::size_t>{}),
                  ContractError);
}

TEST_CASE("pyramid pooling level 2 averages quadrants") {
  const FeatureMap x(1, 2, 2, {1, 2, 3, 4});
  const FeatureMap y = pyramid_pooling_forward(x, std::vector<std::size_t>{1, 2});
  // Channel 0 is the input, 1 the global mean, 2 the 2x2 grid (each pixel its own bin).
  CHECK(std::vector<double>(y.data.begin() + 4, y.data.begin() + 8) ==
        std::vector<double>{2.5, 2.5, 2.5, 2.5});
  CHECK(std::vector<double>(y.data.begin() + 8, y.data.end()) == x.data);
}

TEST_CASE("global average pooling") {
  const FeatureMap x(2, 1, 2, {1, 3, -2, 4});
  CHECK(global_average_pool(x) == Matrix{{2, 1}});
  const FeatureMap g = global_average_pool_backward(x, std::vector<double>{2, 4});
  CHECK(g.data == std::vector<double>{1, 1, 2, 2});
}

// ---- gradient checking -----------------------------------------------------------------------

TEST_CASE("grad_check passes every layer on five seeds") {
  for (const std::string name :
       {"dense", "conv2d", "maxpool", "attention", "side_fusion", "ppm"}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CAPTURE(name);
      CAPTURE(seed);
      CHECK(grad_check(audit_case(name, seed)).max_rel_error <= kLayerGradTolerance);
    }
  }
}

TEST_CASE("grad_check on a dense layer with seed 0") {
  Rng rng(0);
  const GradCheckCase c = dense_case(dense_init(4, 3, rng), test::random_matrix(5, 4, rng));
  CHECK(grad_check(c, 1e-5, 0).max_rel_error <= 1e-4);
}

TEST_CASE("grad_check flags a backward that doubles the gradient") {
  Rng rng(0);
  GradCheckCase c = dense_case(dense_init(4, 3, rng), test::random_matrix(5, 4, rng));
  c.backward = [](const LayerParams& p, const std::vector<Matrix>& in, const Matrix& g) {
    BackwardResult r = dense_backward(p, in[0], g);
    for (auto& [name, grad] : r.param_grads) grad = 2.0 * grad;
    return r;
  };
  const GradCheckResult r = grad_check(c);
  CHECK(r.max_rel_error > 1e-2);
  CHECK(r.max_rel_error == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.worst.rfind("param", 0) == 0);
}

TEST_CASE("grad_check is exact on a zero linear layer") {
  const GradCheckCase c =
      dense_case({{"W", Matrix(3, 2)}, {"b", Matrix(1, 2)}}, Matrix(4, 3));
  CHECK(grad_check(c).max_rel_error <= 1e-8);
}

TEST_CASE("BackwardResult checks gradient shapes") {
  const Matrix x(2, 2);
  CHECK_THROWS_AS(BackwardResult({Matrix(2, 3)}, {}, std::vector<Matrix>{x}, {}), ShapeError);
  const LayerParams p{{"W", Matrix(2, 2)}};
  CHECK_THROWS_AS(BackwardResult({x}, {{"W", Matrix(1, 2)}}, std::vector<Matrix>{x}, p), ShapeError);
  CHECK_THROWS(BackwardResult({x}, {}, std::vector<Matrix>{x}, p));
}
