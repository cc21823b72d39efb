#include "doctest.h"

#include <omp.h>

#include <vector>

#include "pathcaps/kernels.hpp"
#include "pathcaps/rng.hpp"
#include "testutil.hpp"

using namespace pathcaps;

namespace {

std::vector<double> rand_vec(int64_t n, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Runs fn twice, once per driver (several OpenMP threads forced), and
// demands bitwise-equal results.
template <typename Fn>
void check_bitwise_equal(Fn fn) {
  int saved_threads = omp_get_max_threads();
  kernels::set_parallel(false);
  std::vector<double> serial = fn();
  omp_set_num_threads(4);
  kernels::set_parallel(true);
  std::vector<double> parallel = fn();
  omp_set_num_threads(saved_threads);
  REQUIRE(serial.size() == parallel.size());
  CHECK(serial == parallel);

  // repeated runs are deterministic too
  std::vector<double> again = fn();
  CHECK(parallel == again);
}

}  // namespace

TEST_CASE("conv2d kernels: serial reference and OpenMP agree bitwise") {
  kernels::Conv2dDims d;
  d.batch = 3;
  d.c_in = 5;
  d.h = 11;
  d.w = 9;
  d.c_out = 7;
  d.k = 3;
  d.pad = 1;
  d.stride = 1;
  d.oh = 11;
  d.ow = 9;
  auto in = rand_vec(d.batch * d.c_in * d.h * d.w, 1);
  auto ker = rand_vec(d.c_out * d.c_in * d.k * d.k, 2);
  auto bias = rand_vec(d.c_out, 3);
  auto gout = rand_vec(d.batch * d.c_out * d.oh * d.ow, 4);

  check_bitwise_equal([&] {
    std::vector<double> out(static_cast<size_t>(d.batch * d.c_out * d.oh * d.ow));
    kernels::conv2d_forward(in.data(), ker.data(), bias.data(), out.data(), d);
    return out;
  });
  check_bitwise_equal([&] {
    std::vector<double> gin(in.size(), 0.0);
    kernels::conv2d_backward_input(gout.data(), ker.data(), gin.data(), d);
    return gin;
  });
  check_bitwise_equal([&] {
    std::vector<double> gker(ker.size(), 0.0);
    kernels::conv2d_backward_kernel(gout.data(), in.data(), gker.data(), d);
    return gker;
  });
  check_bitwise_equal([&] {
    std::vector<double> gbias(bias.size(), 0.0);
    kernels::conv2d_backward_bias(gout.data(), gbias.data(), d);
    return gbias;
  });
}

TEST_CASE("conv2d kernels: strided case agrees bitwise") {
  kernels::Conv2dDims d;
  d.batch = 2;
  d.c_in = 3;
  d.h = 12;
  d.w = 12;
  d.c_out = 4;
  d.k = 5;
  d.pad = 0;
  d.stride = 2;
  d.oh = 4;
  d.ow = 4;
  auto in = rand_vec(d.batch * d.c_in * d.h * d.w, 5);
  auto ker = rand_vec(d.c_out * d.c_in * d.k * d.k, 6);
  auto bias = rand_vec(d.c_out, 7);
  auto gout = rand_vec(d.batch * d.c_out * d.oh * d.ow, 8);
  check_bitwise_equal([&] {
    std::vector<double> out(static_cast<size_t>(d.batch * d.c_out * d.oh * d.ow));
    kernels::conv2d_forward(in.data(), ker.data(), bias.data(), out.data(), d);
    return out;
  });
  check_bitwise_equal([&] {
    std::vector<double> gker(ker.size(), 0.0);
    kernels::conv2d_backward_kernel(gout.data(), in.data(), gker.data(), d);
    return gker;
  });
}

TEST_CASE("maxpool kernels: serial reference and OpenMP agree bitwise") {
  kernels::Pool2dDims d;
  d.batch = 3;
  d.c = 4;
  d.h = 8;
  d.w = 6;
  d.k = 2;
  d.stride = 2;
  d.oh = 4;
  d.ow = 3;
  auto in = rand_vec(d.batch * d.c * d.h * d.w, 9);
  auto gout = rand_vec(d.batch * d.c * d.oh * d.ow, 10);
  std::vector<int32_t> argmax(static_cast<size_t>(d.batch * d.c * d.oh * d.ow));
  check_bitwise_equal([&] {
    std::vector<double> out(static_cast<size_t>(d.batch * d.c * d.oh * d.ow));
    kernels::maxpool2d_forward(in.data(), out.data(), argmax.data(), d);
    return out;
  });
  check_bitwise_equal([&] {
    std::vector<double> gin(in.size(), 0.0);
    kernels::maxpool2d_backward(gout.data(), argmax.data(), gin.data(), d);
    return gin;
  });
}

TEST_CASE("dense kernels: serial reference and OpenMP agree bitwise") {
  int64_t batch = 5, n = 33, m = 17;
  auto in = rand_vec(batch * n, 11);
  auto wt = rand_vec(m * n, 12);
  auto bias = rand_vec(m, 13);
  auto gout = rand_vec(batch * m, 14);
  check_bitwise_equal([&] {
    std::vector<double> out(static_cast<size_t>(batch * m));
    kernels::dense_forward(in.data(), wt.data(), bias.data(), out.data(), batch, n, m);
    return out;
  });
  check_bitwise_equal([&] {
    std::vector<double> gin(in.size(), 0.0);
    kernels::dense_backward_input(gout.data(), wt.data(), gin.data(), batch, n, m);
    return gin;
  });
  check_bitwise_equal([&] {
    std::vector<double> gwt(wt.size(), 0.0);
    kernels::dense_backward_weight(gout.data(), in.data(), gwt.data(), batch, n, m);
    return gwt;
  });
  check_bitwise_equal([&] {
    std::vector<double> gbias(bias.size(), 0.0);
    kernels::dense_backward_bias(gout.data(), gbias.data(), batch, m);
    return gbias;
  });
}

TEST_CASE("routing kernels: serial reference and OpenMP agree bitwise") {
  int64_t batch = 4, n_in = 13, n_out = 5, d_out = 6, d_in = 3;
  auto u = rand_vec(batch * n_in * d_in, 15);
  auto w = rand_vec(n_in * n_out * d_out * d_in, 16);
  auto c = rand_vec(batch * n_in * n_out, 17, 0.0, 1.0);
  auto uhat = rand_vec(batch * n_in * n_out * d_out, 18);
  auto v = rand_vec(batch * n_out * d_out, 19);
  auto guhat = rand_vec(batch * n_in * n_out * d_out, 20);
  auto gs = rand_vec(batch * n_out * d_out, 21);
  auto gdot = rand_vec(batch * n_in * n_out, 22);

  check_bitwise_equal([&] {
    std::vector<double> out(uhat.size());
    kernels::predict_forward(u.data(), w.data(), out.data(), batch, n_in, n_out, d_out, d_in);
    return out;
  });
  check_bitwise_equal([&] {
    std::vector<double> gu(u.size(), 0.0);
    kernels::predict_backward_u(guhat.data(), w.data(), gu.data(), batch, n_in, n_out, d_out,
                                d_in);
    return gu;
  });
  check_bitwise_equal([&] {
    std::vector<double> gw(w.size(), 0.0);
    kernels::predict_backward_w(guhat.data(), u.data(), gw.data(), batch, n_in, n_out, d_out,
                                d_in);
    return gw;
  });
  check_bitwise_equal([&] {
    std::vector<double> s(static_cast<size_t>(batch * n_out * d_out));
    kernels::vote_sum_forward(c.data(), uhat.data(), s.data(), batch, n_in, n_out, d_out);
    return s;
  });
  check_bitwise_equal([&] {
    std::vector<double> gc(c.size(), 0.0);
    kernels::vote_sum_backward_c(gs.data(), uhat.data(), gc.data(), batch, n_in, n_out, d_out);
    return gc;
  });
  check_bitwise_equal([&] {
    std::vector<double> gh(uhat.size(), 0.0);
    kernels::vote_sum_backward_uhat(gs.data(), c.data(), gh.data(), batch, n_in, n_out, d_out);
    return gh;
  });
  check_bitwise_equal([&] {
    std::vector<double> dot(static_cast<size_t>(batch * n_in * n_out));
    kernels::agreement_forward(uhat.data(), v.data(), dot.data(), batch, n_in, n_out, d_out);
    return dot;
  });
  check_bitwise_equal([&] {
    std::vector<double> gh(uhat.size(), 0.0);
    kernels::agreement_backward_uhat(gdot.data(), v.data(), gh.data(), batch, n_in, n_out,
                                     d_out);
    return gh;
  });
  check_bitwise_equal([&] {
    std::vector<double> gv(v.size(), 0.0);
    kernels::agreement_backward_v(gdot.data(), uhat.data(), gv.data(), batch, n_in, n_out,
                                  d_out);
    return gv;
  });
}
