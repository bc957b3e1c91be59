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

// Serial reference vs OpenMP kernels at model-sized shapes. Prints the median
// wall time of each and whether the outputs agree bit for bit.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include <CLI11.hpp>

#include "msf/kernels.hpp"
#include "msf/rng.hpp"

using namespace msf;

namespace {

double median_ms(int reps, const std::function<void()>& body) {
  std::vector<double> times;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  return times[times.size() / 2];
}

void report(const char* name, double serial_ms, double parallel_ms, bool same) {
  std::printf("%-28s %10.3f %10.3f %8.2fx  %s\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, same ? "identical" : "DIFFERENT");
}

std::vector<double> uniform(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs parallel kernel timings", "bench_kernels"};
  int reps = 5;
  int threads = 0;
  app.add_option("--reps", reps, "Repetitions per kernel (median reported)")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  Rng rng(1);
  std::printf("threads %d, median of %d\n", kernels::max_threads(), reps);
  std::printf("%-28s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  {
    const Matrix a = uniform_matrix(256, 256, -1, 1, rng), b = uniform_matrix(256, 256, -1, 1, rng);
    Matrix s, p;
    const double ts = median_ms(reps, [&] { s = kernels::serial::matmul(a, b); });
    const double tp = median_ms(reps, [&] { p = kernels::parallel::matmul(a, b); });
    report("matmul 256^3", ts, tp, s.data() == p.data());
  }
  {
    const kernels::ConvShape shape{8, 8, 64, 64, 3};
    const auto in = uniform(8 * 64 * 64, rng), w = uniform(8 * 8 * 9, rng), bias = uniform(8, rng);
    std::vector<double> s(8 * 64 * 64), p(s.size());
    const double ts = median_ms(reps, [&] { kernels::serial::conv2d_forward(shape, in, w, bias, s); });
    const double tp = median_ms(reps, [&] { kernels::parallel::conv2d_forward(shape, in, w, bias, p); });
    report("conv2d fwd 8x8x64x64 k3", ts, tp, s == p);

    const auto g = uniform(s.size(), rng);
    std::vector<double> si(in.size()), sw(w.size()), sb(8), pi(in.size()), pw(w.size()), pb(8);
    auto zero = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
    const double tbs = median_ms(reps, [&] {
      zero(si), zero(sw), zero(sb);
      kernels::serial::conv2d_backward(shape, in, w, g, si, sw, sb);
    });
    const double tbp = median_ms(reps, [&] {
      zero(pi), zero(pw), zero(pb);
      kernels::parallel::conv2d_backward(shape, in, w, g, pi, pw, pb);
    });
    report("conv2d bwd 8x8x64x64 k3", tbs, tbp, si == pi && sw == pw && sb == pb);
  }
  {
    const Matrix f = uniform_matrix(512, 64, -1, 1, rng);
    Matrix s, p;
    const double ts = median_ms(reps, [&] { s = kernels::serial::cosine_similarity(f); });
    const double tp = median_ms(reps, [&] { p = kernels::parallel::cosine_similarity(f); });
    report("cosine kNN 512x64", ts, tp, s.data() == p.data());
  }
  {
    const auto img = uniform(3 * 256 * 256, rng);
    std::vector<double> s(img.size()), p(img.size());
    const double ts = median_ms(reps, [&] { kernels::serial::median_filter(3, 256, 256, 3, img, s); });
    const double tp = median_ms(reps, [&] { kernels::parallel::median_filter(3, 256, 256, 3, img, p); });
    report("median 3x256x256 w3", ts, tp, s == p);
  }
  return 0;
}
