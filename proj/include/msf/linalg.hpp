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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace msf {

// Dense row-major matrix of doubles. The value type every other module
// passes around.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  // Literal construction; rejects ragged rows and non-finite entries.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::string shape_string() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column i pairs with eigenvalues[i]
};

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);
bool all_finite(const Matrix& m) noexcept;

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b and a * b^T without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);
Matrix& operator+=(Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);

// Adds the 1 x cols row vector to every row.
Matrix add_row_broadcast(const Matrix& m, const Matrix& row);
// 1 x cols column sums.
Matrix column_sums(const Matrix& m);

double frobenius_norm(const Matrix& m) noexcept;
double max_abs(const Matrix& m) noexcept;
double trace(const Matrix& m);

// Per-row softmax with max subtraction.
Matrix row_softmax(const Matrix& m);

// Cyclic Jacobi. Eigenvalues ascending; the first nonzero component of each
// eigenvector column is made nonnegative.
EigenDecomposition symmetric_eigen(const Matrix& a);

}  // namespace msf
