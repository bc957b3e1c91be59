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

#include "msf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msf/errors.hpp"
#include "msf/kernels.hpp"

namespace msf {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: " + std::to_string(data_.size()) + " values for shape " +
                     shape_string());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix literal: ragged rows");
    for (double v : r) {
      if (!std::isfinite(v)) throw NumericError("Matrix literal: non-finite entry");
      data_.push_back(v);
    }
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

bool all_finite(const Matrix& m) noexcept {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c = kernels::parallel::matmul(a, b);
  if (!all_finite(c)) {
    throw NumericError("matmul " + a.shape_string() + " x " + b.shape_string() +
                       " produced a non-finite value");
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) { return matmul(transpose(a), b); }

Matrix matmul_nt(const Matrix& a, const Matrix& b) { return matmul(a, transpose(b)); }

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c += b;
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Matrix operator*(double s, const Matrix& m) {
  Matrix c = m;
  for (double& v : c.data()) v *= s;
  return c;
}

Matrix& operator+=(Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
  return c;
}

Matrix add_row_broadcast(const Matrix& m, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != m.cols()) {
    throw ShapeError("row broadcast: " + m.shape_string() + " + " + row.shape_string());
  }
  Matrix c = m;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) += row(0, j);
  }
  return c;
}

Matrix column_sums(const Matrix& m) {
  Matrix s(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) s(0, j) += m(i, j);
  }
  return s;
}

double frobenius_norm(const Matrix& m) noexcept {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& m) noexcept {
  double best = 0.0;
  for (double v : m.data()) best = std::max(best, std::abs(v));
  return best;
}

double trace(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("trace of non-square " + m.shape_string());
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
  return t;
}

Matrix row_softmax(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto in = m.row(i);
    auto o = out.row(i);
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - peak);
      total += o[j];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagonalTol = 1e-12;
constexpr double kSymmetryTol = 1e-10;

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (i != j) s += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(s);
}

// Zeroes a(p,q) by a plane rotation applied on both sides; accumulates it in v.
void rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double apk = a(p, k);
    const double aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

EigenDecomposition symmetric_eigen(const Matrix& input) {
  if (input.rows() != input.cols()) {
    throw ContractError("symmetric_eigen: non-square input " + input.shape_string());
  }
  const std::size_t n = input.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(input(i, j) - input(j, i)) > kSymmetryTol) {
        throw ContractError("symmetric_eigen: input asymmetric at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
      }
    }
  }

  Matrix a = input;
  Matrix v = Matrix::identity(n);
  // Absolute threshold floored at the input scale so large-norm inputs can
  // still converge in double precision.
  const double tol = kOffDiagonalTol * std::max(1.0, frobenius_norm(input));
  int sweep = 0;
  for (; sweep < kMaxSweeps && off_diagonal_norm(a) >= tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) rotate(a, v, p, q);
    }
  }
  const double residual = off_diagonal_norm(a);
  if (residual >= tol) {
    throw ConvergenceError("symmetric_eigen: no convergence after 100 sweeps", residual);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    const std::size_t src = order[col];
    out.eigenvalues[col] = a(src, src);
    double sign = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (v(k, src) != 0.0) {
        sign = v(k, src) < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, col) = sign * v(k, src);
  }
  return out;
}

}  // namespace msf
