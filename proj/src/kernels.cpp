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

#include "msf/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "msf/errors.hpp"

namespace msf::kernels {

namespace {

void check_matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + a.shape_string() + " x " + b.shape_string());
  }
}

void check_conv(const ConvShape& s, std::size_t input, std::size_t weights) {
  if (s.kernel % 2 == 0) throw ContractError("conv2d: kernel size must be odd");
  if (input != s.in_channels * s.height * s.width) {
    throw ShapeError("conv2d: input length " + std::to_string(input) + " does not match " +
                     std::to_string(s.in_channels) + "x" + std::to_string(s.height) + "x" +
                     std::to_string(s.width));
  }
  if (weights != s.out_channels * s.in_channels * s.kernel * s.kernel) {
    throw ShapeError("conv2d: weight length " + std::to_string(weights) + " mismatch");
  }
}

std::vector<double> row_norms(const Matrix& f) {
  std::vector<double> norms(f.rows());
  for (std::size_t i = 0; i < f.rows(); ++i) {
    double s = 0.0;
    for (double v : f.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) {
      throw DegenerateFeatureError("cosine similarity: row " + std::to_string(i) + " has zero norm",
                                   i);
    }
  }
  return norms;
}

double window_median(std::size_t height, std::size_t width, std::size_t window,
                     const double* plane, std::size_t y, std::size_t x, std::vector<double>& buf) {
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  buf.clear();
  for (std::ptrdiff_t dy = -half; dy <= half; ++dy) {
    const auto yy = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) + dy, 0,
                                               static_cast<std::ptrdiff_t>(height) - 1);
    for (std::ptrdiff_t dx = -half; dx <= half; ++dx) {
      const auto xx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) + dx, 0,
                                                 static_cast<std::ptrdiff_t>(width) - 1);
      buf.push_back(plane[yy * width + xx]);
    }
  }
  auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
  std::nth_element(buf.begin(), mid, buf.end());
  return *mid;
}

}  // namespace

int max_threads() noexcept { return omp_get_max_threads(); }

// ---------------------------------------------------------------------------
// serial reference

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b);
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        if (a(i, k) != 0.0) sum += a(i, k) * b(k, j);
      }
      c(i, j) = sum;
    }
  }
  return c;
}

void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output) {
  check_conv(s, input.size(), weights.size());
  const auto H = static_cast<std::ptrdiff_t>(s.height);
  const auto W = static_cast<std::ptrdiff_t>(s.width);
  const auto K = static_cast<std::ptrdiff_t>(s.kernel);
  const std::ptrdiff_t pad = K / 2;
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    for (std::ptrdiff_t y = 0; y < H; ++y) {
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        double sum = bias[o];
        for (std::size_t c = 0; c < s.in_channels; ++c) {
          for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
            const std::ptrdiff_t iy = y + ky - pad;
            if (iy < 0 || iy >= H) continue;
            for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
              const std::ptrdiff_t ix = x + kx - pad;
              if (ix < 0 || ix >= W) continue;
              sum += input[(c * s.height + iy) * s.width + ix] *
                     weights[((o * s.in_channels + c) * s.kernel + ky) * s.kernel + kx];
            }
          }
        }
        output[(o * s.height + y) * s.width + x] = sum;
      }
    }
  }
}

void conv2d_backward(const ConvShape& s, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> grad_out,
                     std::span<double> input_grad, std::span<double> weight_grad,
                     std::span<double> bias_grad) {
  check_conv(s, input.size(), weights.size());
  const auto H = static_cast<std::ptrdiff_t>(s.height);
  const auto W = static_cast<std::ptrdiff_t>(s.width);
  const auto K = static_cast<std::ptrdiff_t>(s.kernel);
  const std::ptrdiff_t pad = K / 2;
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t x = 0; x < W; ++x) {
          const double g = grad_out[(o * s.height + y) * s.width + x];
          for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
            const std::ptrdiff_t iy = y + ky - pad;
            if (iy < 0 || iy >= H) continue;
            for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
              const std::ptrdiff_t ix = x + kx - pad;
              if (ix < 0 || ix >= W) continue;
              const std::size_t wi = ((o * s.in_channels + c) * s.kernel + ky) * s.kernel + kx;
              const std::size_t ii = (c * s.height + iy) * s.width + ix;
              input_grad[ii] += g * weights[wi];
              weight_grad[wi] += g * input[ii];
            }
          }
        }
      }
    }
    for (std::size_t p = 0; p < s.height * s.width; ++p) {
      bias_grad[o] += grad_out[o * s.height * s.width + p];
    }
  }
}

Matrix cosine_similarity(const Matrix& f) {
  const auto norms = row_norms(f);
  Matrix sim(f.rows(), f.rows());
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t j = 0; j < f.rows(); ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < f.cols(); ++d) dot += f(i, d) * f(j, d);
      sim(i, j) = dot / (norms[i] * norms[j]);
    }
  }
  return sim;
}

void median_filter(std::size_t channels, std::size_t height, std::size_t width,
                   std::size_t window, std::span<const double> input, std::span<double> output) {
  std::vector<double> buf;
  buf.reserve(window * window);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = input.data() + c * height * width;
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        output[(c * height + y) * width + x] = window_median(height, width, window, plane, y, x, buf);
      }
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP
//
// Loops are reordered so the innermost one runs along a row, but every output
// element still receives its terms in the same order as the serial loops.

namespace parallel {

namespace {

// Columns x for which x + kx - pad lies inside [0, W).
struct Span {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;
};

Span valid_columns(std::ptrdiff_t kx, std::ptrdiff_t pad, std::ptrdiff_t W) {
  return {std::max<std::ptrdiff_t>(0, pad - kx), std::min<std::ptrdiff_t>(W, W + pad - kx)};
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b);
  Matrix c(a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t cols = b.cols();
  const double* bd = b.data().data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* arow = a.data().data() + i * inner;
    double* crow = c.data().data() + i * cols;
    // k-outer keeps the per-element summation order of the reference loop
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = bd + k * cols;
      for (std::size_t j = 0; j < cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

void conv2d_forward(const ConvShape& s, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output) {
  check_conv(s, input.size(), weights.size());
  const auto H = static_cast<std::ptrdiff_t>(s.height);
  const auto W = static_cast<std::ptrdiff_t>(s.width);
  const auto K = static_cast<std::ptrdiff_t>(s.kernel);
  const std::ptrdiff_t pad = K / 2;
  const auto outs = static_cast<std::ptrdiff_t>(s.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < outs; ++o) {
    const double* wo = weights.data() + o * s.in_channels * s.kernel * s.kernel;
    for (std::ptrdiff_t y = 0; y < H; ++y) {
      double* __restrict row = output.data() + (o * H + y) * W;
      for (std::ptrdiff_t x = 0; x < W; ++x) row[x] = bias[o];
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        const double* plane = input.data() + c * s.height * s.width;
        const double* wc = wo + c * s.kernel * s.kernel;
        for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
          const std::ptrdiff_t iy = y + ky - pad;
          if (iy < 0 || iy >= H) continue;
          const double* __restrict in = plane + iy * W - pad;
          for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
            const double w = wc[ky * K + kx];
            const Span cols = valid_columns(kx, pad, W);
            for (std::ptrdiff_t x = cols.lo; x < cols.hi; ++x) row[x] += in[x + kx] * w;
          }
        }
      }
    }
  }
}

void conv2d_backward(const ConvShape& s, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> grad_out,
                     std::span<double> input_grad, std::span<double> weight_grad,
                     std::span<double> bias_grad) {
  check_conv(s, input.size(), weights.size());
  const auto H = static_cast<std::ptrdiff_t>(s.height);
  const auto W = static_cast<std::ptrdiff_t>(s.width);
  const auto K = static_cast<std::ptrdiff_t>(s.kernel);
  const std::ptrdiff_t pad = K / 2;
  const std::size_t plane = s.height * s.width;
  const auto ins = static_cast<std::ptrdiff_t>(s.in_channels);
  const auto outs = static_cast<std::ptrdiff_t>(s.out_channels);

  // input gradient: each thread owns whole input channels. For a fixed input
  // element, descending kx visits source columns x in ascending order.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < ins; ++c) {
    double* ig = input_grad.data() + c * plane;
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      const double* wc = weights.data() + (o * s.in_channels + c) * s.kernel * s.kernel;
      const double* go = grad_out.data() + o * plane;
      for (std::ptrdiff_t y = 0; y < H; ++y) {
        const double* g = go + y * W;
        for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
          const std::ptrdiff_t iy = y + ky - pad;
          if (iy < 0 || iy >= H) continue;
          double* __restrict dst = ig + iy * W - pad;
          for (std::ptrdiff_t kx = K; kx-- > 0;) {
            const double w = wc[ky * K + kx];
            const Span cols = valid_columns(kx, pad, W);
            for (std::ptrdiff_t x = cols.lo; x < cols.hi; ++x) dst[x + kx] += g[x] * w;
          }
        }
      }
    }
  }

  // weight and bias gradients: each thread owns whole output channels
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < outs; ++o) {
    const double* go = grad_out.data() + o * plane;
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const double* in = input.data() + c * plane;
      double* wg = weight_grad.data() + (o * s.in_channels + c) * s.kernel * s.kernel;
      for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
        const std::ptrdiff_t y_lo = std::max<std::ptrdiff_t>(0, pad - ky);
        const std::ptrdiff_t y_hi = std::min<std::ptrdiff_t>(H, H + pad - ky);
        for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
          const Span cols = valid_columns(kx, pad, W);
          double acc = wg[ky * K + kx];
          for (std::ptrdiff_t y = y_lo; y < y_hi; ++y) {
            const double* g = go + y * W;
            const double* src = in + (y + ky - pad) * W + kx - pad;
            for (std::ptrdiff_t x = cols.lo; x < cols.hi; ++x) acc += g[x] * src[x];
          }
          wg[ky * K + kx] = acc;
        }
      }
    }
    for (std::size_t p = 0; p < plane; ++p) bias_grad[o] += go[p];
  }
}

Matrix cosine_similarity(const Matrix& f) {
  const auto norms = row_norms(f);
  Matrix sim(f.rows(), f.rows());
  const auto n = static_cast<std::ptrdiff_t>(f.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ri = f.row(i);
    for (std::size_t j = 0; j < f.rows(); ++j) {
      const auto rj = f.row(j);
      double dot = 0.0;
      for (std::size_t d = 0; d < f.cols(); ++d) dot += ri[d] * rj[d];
      sim(i, j) = dot / (norms[i] * norms[j]);
    }
  }
  return sim;
}

void median_filter(std::size_t channels, std::size_t height, std::size_t width,
                   std::size_t window, std::span<const double> input, std::span<double> output) {
  const auto rows = static_cast<std::ptrdiff_t>(channels * height);
#pragma omp parallel
  {
    std::vector<double> buf;
    buf.reserve(window * window);
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const std::size_t c = r / height;
      const std::size_t y = r % height;
      const double* plane = input.data() + c * height * width;
      for (std::size_t x = 0; x < width; ++x) {
        output[r * width + x] = window_median(height, width, window, plane, y, x, buf);
      }
    }
  }
}

}  // namespace parallel

}  // namespace msf::kernels
