// Path-sized workloads through the heavy kernels, once with the serial
// reference driver and once with the OpenMP driver (thread count comes from
// OMP_NUM_THREADS). Outputs are bitwise identical; only timing differs.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "pathcaps/kernels.hpp"
#include "pathcaps/rng.hpp"

namespace {

using namespace pathcaps;

std::vector<double> random_vec(int64_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

kernels::Conv2dDims conv_dims(int64_t batch) {
  kernels::Conv2dDims d;
  d.batch = batch;
  d.c_in = 16;
  d.h = d.w = 28;
  d.c_out = 16;
  d.k = 9;
  d.pad = 4;
  d.stride = 1;
  d.oh = d.ow = 28;
  return d;
}

void bench_conv_forward(benchmark::State& state, bool parallel) {
  kernels::set_parallel(parallel);
  auto d = conv_dims(8);
  auto in = random_vec(d.batch * d.c_in * d.h * d.w, 1);
  auto ker = random_vec(d.c_out * d.c_in * d.k * d.k, 2);
  auto bias = random_vec(d.c_out, 3);
  std::vector<double> out(static_cast<size_t>(d.batch * d.c_out * d.oh * d.ow));
  for (auto _ : state) {
    kernels::conv2d_forward(in.data(), ker.data(), bias.data(), out.data(), d);
    benchmark::DoNotOptimize(out.data());
  }
  kernels::set_parallel(true);
}

void bench_conv_backward(benchmark::State& state, bool parallel) {
  kernels::set_parallel(parallel);
  auto d = conv_dims(8);
  auto gout = random_vec(d.batch * d.c_out * d.oh * d.ow, 4);
  auto ker = random_vec(d.c_out * d.c_in * d.k * d.k, 5);
  auto in = random_vec(d.batch * d.c_in * d.h * d.w, 6);
  std::vector<double> gin(in.size());
  std::vector<double> gker(ker.size());
  for (auto _ : state) {
    kernels::conv2d_backward_input(gout.data(), ker.data(), gin.data(), d);
    kernels::conv2d_backward_kernel(gout.data(), in.data(), gker.data(), d);
    benchmark::DoNotOptimize(gin.data());
    benchmark::DoNotOptimize(gker.data());
  }
  kernels::set_parallel(true);
}

void bench_dense_forward(benchmark::State& state, bool parallel) {
  kernels::set_parallel(parallel);
  int64_t batch = 32, n = 1024, m = 784;
  auto in = random_vec(batch * n, 7);
  auto wt = random_vec(m * n, 8);
  auto bias = random_vec(m, 9);
  std::vector<double> out(static_cast<size_t>(batch * m));
  for (auto _ : state) {
    kernels::dense_forward(in.data(), wt.data(), bias.data(), out.data(), batch, n, m);
    benchmark::DoNotOptimize(out.data());
  }
  kernels::set_parallel(true);
}

void bench_routing(benchmark::State& state, bool parallel) {
  kernels::set_parallel(parallel);
  int64_t batch = 32, n_in = 245, n_out = 10, d_out = 16, d_in = 8;
  auto u = random_vec(batch * n_in * d_in, 10);
  auto w = random_vec(n_in * n_out * d_out * d_in, 11);
  auto c = random_vec(batch * n_in * n_out, 12);
  std::vector<double> uhat(static_cast<size_t>(batch * n_in * n_out * d_out));
  std::vector<double> s(static_cast<size_t>(batch * n_out * d_out));
  std::vector<double> dot(static_cast<size_t>(batch * n_in * n_out));
  for (auto _ : state) {
    kernels::predict_forward(u.data(), w.data(), uhat.data(), batch, n_in, n_out, d_out, d_in);
    kernels::vote_sum_forward(c.data(), uhat.data(), s.data(), batch, n_in, n_out, d_out);
    kernels::agreement_forward(uhat.data(), s.data(), dot.data(), batch, n_in, n_out, d_out);
    benchmark::DoNotOptimize(dot.data());
  }
  kernels::set_parallel(true);
}

}  // namespace

BENCHMARK_CAPTURE(bench_conv_forward, serial, false);
BENCHMARK_CAPTURE(bench_conv_forward, openmp, true);
BENCHMARK_CAPTURE(bench_conv_backward, serial, false);
BENCHMARK_CAPTURE(bench_conv_backward, openmp, true);
BENCHMARK_CAPTURE(bench_dense_forward, serial, false);
BENCHMARK_CAPTURE(bench_dense_forward, openmp, true);
BENCHMARK_CAPTURE(bench_routing, serial, false);
BENCHMARK_CAPTURE(bench_routing, openmp, true);

BENCHMARK_MAIN();
