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

#include <cmath>
#include <string>

#include "msf/errors.hpp"
#include "msf/layers.hpp"

namespace msf {

namespace {

Matrix column_block(const Matrix& m, std::size_t first, std::size_t width) {
  Matrix out(m.rows(), width);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < width; ++j) out(i, j) = m(i, first + j);
  }
  return out;
}

void put_column_block(Matrix& m, std::size_t first, const Matrix& block) {
  for (std::size_t i = 0; i < block.rows(); ++i) {
    for (std::size_t j = 0; j < block.cols(); ++j) m(i, first + j) = block(i, j);
  }
}

struct Projections {
  Matrix q, k, v;  // n x d_model
  std::size_t head_dim;
  double scale;
};

// v may be null when only the attention weights are wanted.
Projections project(const LayerParams& p, const Matrix& q, const Matrix& k, const Matrix* v,
                    std::size_t heads) {
  const Matrix& wq = p.at("WQ");
  const Matrix& wk = p.at("WK");
  const Matrix& wv = p.at("WV");
  const std::size_t d_model = wq.cols();
  if (heads == 0 || d_model % heads != 0) {
    throw ShapeError("attention: model dim " + std::to_string(d_model) +
                     " not divisible by heads " + std::to_string(heads));
  }
  if (wk.cols() != d_model || wv.cols() != d_model || p.at("WO").rows() != d_model) {
    throw ShapeError("attention: projection widths disagree");
  }
  if (q.cols() != wq.rows() || k.cols() != wk.rows() || (v && v->cols() != wv.rows())) {
    throw ShapeError("attention: q/k/v widths incompatible with projections");
  }
  if (v && k.rows() != v->rows()) throw ShapeError("attention: key and value counts differ");
  const std::size_t head_dim = d_model / heads;
  return {matmul(q, wq), matmul(k, wk), v ? matmul(*v, wv) : Matrix(), head_dim,
          1.0 / std::sqrt(static_cast<double>(head_dim))};
}

Matrix head_scores(const Projections& pr, std::size_t h) {
  const Matrix qh = column_block(pr.q, h * pr.head_dim, pr.head_dim);
  const Matrix kh = column_block(pr.k, h * pr.head_dim, pr.head_dim);
  return pr.scale * matmul_nt(qh, kh);
}

}  // namespace

LayerParams attention_init(std::size_t d_q, std::size_t d_k, std::size_t d_v, std::size_t d_model,
                           std::size_t d_out, Rng& rng) {
  return {{"WQ", glorot_uniform(d_q, d_model, d_q, d_model, rng)},
          {"WK", glorot_uniform(d_k, d_model, d_k, d_model, rng)},
          {"WV", glorot_uniform(d_v, d_model, d_v, d_model, rng)},
          {"WO", glorot_uniform(d_model, d_out, d_model, d_out, rng)}};
}

std::vector<Matrix> attention_weights(const LayerParams& p, const Matrix& q, const Matrix& k,
                                      std::size_t heads) {
  const auto pr = project(p, q, k, nullptr, heads);
  std::vector<Matrix> out;
  for (std::size_t h = 0; h < heads; ++h) out.push_back(row_softmax(head_scores(pr, h)));
  return out;
}

Matrix multihead_attention_forward(const LayerParams& p, const Matrix& q, const Matrix& k,
                                   const Matrix& v, std::size_t heads) {
  const auto pr = project(p, q, k, &v, heads);
  Matrix concat(q.rows(), pr.q.cols());
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix weights = row_softmax(head_scores(pr, h));
    put_column_block(concat, h * pr.head_dim,
                     matmul(weights, column_block(pr.v, h * pr.head_dim, pr.head_dim)));
  }
  return matmul(concat, p.at("WO"));
}

BackwardResult multihead_attention_backward(const LayerParams& p, const Matrix& q, const Matrix& k,
                                            const Matrix& v, std::size_t heads,
                                            const Matrix& grad_out) {
  const auto pr = project(p, q, k, &v, heads);
  const Matrix& wo = p.at("WO");
  if (grad_out.rows() != q.rows() || grad_out.cols() != wo.cols()) {
    throw ShapeError("attention_backward: upstream gradient " + grad_out.shape_string());
  }
  const std::size_t d = pr.head_dim;
  Matrix concat(q.rows(), pr.q.cols());
  Matrix d_qp(pr.q.rows(), pr.q.cols());
  Matrix d_kp(pr.k.rows(), pr.k.cols());
  Matrix d_vp(pr.v.rows(), pr.v.cols());
  std::vector<Matrix> weights(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    weights[h] = row_softmax(head_scores(pr, h));
    put_column_block(concat, h * d, matmul(weights[h], column_block(pr.v, h * d, d)));
  }
  const Matrix d_wo = matmul_tn(concat, grad_out);
  const Matrix d_concat = matmul_nt(grad_out, wo);

  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix& a = weights[h];
    const Matrix d_head = column_block(d_concat, h * d, d);
    const Matrix vh = column_block(pr.v, h * d, d);
    const Matrix d_a = matmul_nt(d_head, vh);
    put_column_block(d_vp, h * d, matmul_tn(a, d_head));
    // softmax backward, row by row
    Matrix d_s(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) dot += d_a(i, j) * a(i, j);
      for (std::size_t j = 0; j < a.cols(); ++j) d_s(i, j) = a(i, j) * (d_a(i, j) - dot);
    }
    d_s = pr.scale * d_s;
    put_column_block(d_qp, h * d, matmul(d_s, column_block(pr.k, h * d, d)));
    put_column_block(d_kp, h * d, matmul_tn(d_s, column_block(pr.q, h * d, d)));
  }

  const Matrix inputs[] = {q, k, v};
  return BackwardResult(
      {matmul_nt(d_qp, p.at("WQ")), matmul_nt(d_kp, p.at("WK")), matmul_nt(d_vp, p.at("WV"))},
      {{"WQ", matmul_tn(q, d_qp)},
       {"WK", matmul_tn(k, d_kp)},
       {"WV", matmul_tn(v, d_vp)},
       {"WO", d_wo}},
      inputs, p);
}

}  // namespace msf
