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

// Hot loops in two flavours. `parallel` is what the library calls; `serial`
// is the reference it is tested against. Each output element is produced by
// exactly one thread in the same summation order as the serial loop, so the
// two agree bit for bit.

#include <cstddef>
#include <span>

#include "msf/linalg.hpp"

namespace msf::kernels {

struct ConvShape {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t height;
  std::size_t width;
  std::size_t kernel;  // odd; zero padding of kernel/2 keeps spatial size
};

namespace serial {

// Zero entries of `a` are skipped, so sparse graph operators cost O(nnz * cols).
Matrix matmul(const Matrix& a, const Matrix& b);

// input: in_channels x H x W, weights: out x in x k x k, bias: out.
void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output);
// Accumulates into input_grad / weight_grad / bias_grad (caller zeroes them).
void conv2d_backward(const ConvShape& s, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> grad_out,
                     std::span<double> input_grad, std::span<double> weight_grad,
                     std::span<double> bias_grad);

// n x n cosine similarities between rows; rows must be nonzero.
Matrix cosine_similarity(const Matrix& features);

// Median over a window x window neighbourhood with replicated borders.
void median_filter(std::size_t channels, std::size_t height, std::size_t width,
                   std::size_t window, std::span<const double> input,
                   std::span<double> output);

}  // namespace serial

namespace parallel {

Matrix matmul(const Matrix& a, const Matrix& b);
void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output);
void conv2d_backward(const ConvShape& s, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> grad_out,
                     std::span<double> input_grad, std::span<double> weight_grad,
                     std::span<double> bias_grad);
Matrix cosine_similarity(const Matrix& features);
void median_filter(std::size_t channels, std::size_t height, std::size_t width,
                   std::size_t window, std::span<const double> input,
                   std::span<double> output);

}  // namespace parallel

int max_threads() noexcept;

}  // namespace msf::kernels
