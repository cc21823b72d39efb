#include "doctest.h"

#include "pathcaps/capsules.hpp"
#include "pathcaps/errors.hpp"
#include "pathcaps/gradcheck.hpp"
#include "pathcaps/model.hpp"
#include "pathcaps/ops.hpp"
#include "testutil.hpp"

using namespace pathcaps;
using testutil::random_tensor;

namespace {
constexpr double kEps = 1e-5;
constexpr double kTol = 1e-4;
}  // namespace

TEST_CASE("finite_diff_check: f = sum has zero error") {
  auto f = [](Graph&, const Tensor& x) { return ops::sum(x); };
  CHECK(finite_diff_check(f, random_tensor({7}, 1), kEps) < 1e-10);
}

TEST_CASE("finite_diff_check: contract enforcement") {
  auto f = [](Graph&, const Tensor& x) { return ops::sum(x); };
  auto nonscalar = [](Graph&, const Tensor& x) { return ops::mul(x, x); };
  Tensor x = random_tensor({3}, 2);
  CHECK_THROWS_AS(finite_diff_check(f, x, 1e-8), ContractError);
  CHECK_THROWS_AS(finite_diff_check(f, x, 1e-3), ContractError);
  CHECK_THROWS_AS(finite_diff_check(nonscalar, x, kEps), ContractError);
}

TEST_CASE("gradients of sum(squash(x)) match finite differences tightly") {
  auto f = [](Graph&, const Tensor& x) { return ops::sum(squash(x)); };
  CHECK(finite_diff_check(f, random_tensor({3, 4}, 3), kEps) < 1e-5);
}

TEST_CASE("per-op finite-difference sweep") {
  SUBCASE("conv2d w.r.t. input, kernel and bias") {
    Tensor x = random_tensor({2, 3, 6, 7}, 10);
    Tensor k = random_tensor({4, 3, 3, 3}, 11);
    Tensor b = random_tensor({4}, 12);
    auto loss = [](const Tensor& t) { return ops::sum(ops::mul(t, t)); };
    auto fx = [&](Graph&, const Tensor& v) { return loss(ops::conv2d(v, k, b, 1, 1)); };
    auto fk = [&](Graph&, const Tensor& v) { return loss(ops::conv2d(x, v, b, 1, 1)); };
    auto fb = [&](Graph&, const Tensor& v) { return loss(ops::conv2d(x, k, v, 1, 1)); };
    CHECK(finite_diff_check(fx, x, kEps) < kTol);
    CHECK(finite_diff_check(fk, k, kEps) < kTol);
    CHECK(finite_diff_check(fb, b, kEps) < kTol);
  }
  SUBCASE("conv2d with stride 2") {
    Tensor x = random_tensor({1, 2, 9, 9}, 13);
    Tensor k = random_tensor({3, 2, 3, 3}, 14);
    Tensor b = random_tensor({3}, 15);
    auto fk = [&](Graph&, const Tensor& v) {
      return ops::sum(ops::mul(ops::conv2d(x, v, b, 0, 2), ops::conv2d(x, v, b, 0, 2)));
    };
    CHECK(finite_diff_check(fk, k, kEps) < kTol);
  }
  SUBCASE("maxpool2d") {
    Tensor x = random_tensor({2, 2, 6, 6}, 16);  // continuous values, ties measure-zero
    auto f = [](Graph&, const Tensor& v) {
      Tensor y = ops::maxpool2d(v, 2, 2);
      return ops::sum(ops::mul(y, y));
    };
    CHECK(finite_diff_check(f, x, kEps) < kTol);
  }
  SUBCASE("dense w.r.t. all arguments") {
    Tensor x = random_tensor({3, 4}, 17);
    Tensor w = random_tensor({5, 4}, 18);
    Tensor b = random_tensor({5}, 19);
    auto loss = [](const Tensor& t) { return ops::sum(ops::mul(t, t)); };
    auto fx = [&](Graph&, const Tensor& v) { return loss(ops::dense(v, w, b)); };
    auto fw = [&](Graph&, const Tensor& v) { return loss(ops::dense(x, v, b)); };
    auto fb = [&](Graph&, const Tensor& v) { return loss(ops::dense(x, w, v)); };
    CHECK(finite_diff_check(fx, x, kEps) < kTol);
    CHECK(finite_diff_check(fw, w, kEps) < kTol);
    CHECK(finite_diff_check(fb, b, kEps) < kTol);
  }
  SUBCASE("softmax, sigmoid, relu, elementwise") {
    Tensor x = random_tensor({2, 5}, 20);
    auto weighted = [](const Tensor& t) {
      Tensor w = random_tensor(t.shape(), 99, 0.5, 1.5);  // break symmetry in the loss
      return ops::sum(ops::mul(t, w));
    };
    auto fsm = [&](Graph&, const Tensor& v) { return weighted(ops::softmax_axis(v, 1)); };
    auto fsg = [&](Graph&, const Tensor& v) { return weighted(ops::sigmoid(v)); };
    auto frl = [&](Graph&, const Tensor& v) { return weighted(ops::relu(v)); };
    auto fsc = [&](Graph&, const Tensor& v) { return ops::sum(ops::scale(v, -2.5)); };
    auto fsr = [&](Graph&, const Tensor& v) { return ops::sum(ops::scale_rows(v, {2.0, 0.5})); };
    CHECK(finite_diff_check(fsm, x, kEps) < kTol);
    CHECK(finite_diff_check(fsg, x, kEps) < kTol);
    CHECK(finite_diff_check(frl, x, kEps) < kTol);
    CHECK(finite_diff_check(fsc, x, kEps) < kTol);
    CHECK(finite_diff_check(fsr, x, kEps) < kTol);
  }
  SUBCASE("capsule rearrangement ops") {
    Tensor x = random_tensor({2, 4, 3, 3}, 21);
    auto f1 = [](Graph&, const Tensor& v) {
      Tensor y = ops::capsule_grid(v, 2);
      return ops::sum(ops::mul(y, y));
    };
    CHECK(finite_diff_check(f1, x, kEps) < kTol);

    Tensor a = random_tensor({2, 2, 3}, 22);
    Tensor bb = random_tensor({2, 1, 3}, 23);
    auto f2 = [&](Graph&, const Tensor& v) {
      Tensor y = ops::concat_units({v, bb});
      return ops::sum(ops::mul(y, y));
    };
    CHECK(finite_diff_check(f2, a, kEps) < kTol);

    auto f3 = [](Graph&, const Tensor& v) {
      Tensor y = ops::select_capsule_mask(v, {1, 0});
      return ops::sum(ops::mul(y, y));
    };
    CHECK(finite_diff_check(f3, a, kEps) < kTol);
  }
  SUBCASE("capsule math ops") {
    Tensor u = random_tensor({2, 3, 4}, 24);
    Tensor w = random_tensor({3, 2, 5, 4}, 25);
    auto loss = [](const Tensor& t) { return ops::sum(ops::mul(t, t)); };
    auto fu = [&](Graph&, const Tensor& v) { return loss(predict(v, w)); };
    auto fw = [&](Graph&, const Tensor& v) { return loss(predict(u, v)); };
    CHECK(finite_diff_check(fu, u, kEps) < kTol);
    CHECK(finite_diff_check(fw, w, kEps) < kTol);

    Tensor uhat = random_tensor({2, 3, 2, 5}, 26);
    Tensor c = random_tensor({2, 3, 2}, 27, 0.1, 0.9);
    auto fc = [&](Graph&, const Tensor& v) { return loss(weighted_vote_sum(v, uhat)); };
    auto fh = [&](Graph&, const Tensor& v) { return loss(weighted_vote_sum(c, v)); };
    CHECK(finite_diff_check(fc, c, kEps) < kTol);
    CHECK(finite_diff_check(fh, uhat, kEps) < kTol);

    Tensor caps = random_tensor({2, 2, 5}, 28);
    auto fa = [&](Graph&, const Tensor& v) { return loss(agreement(v, caps)); };
    auto fvc = [&](Graph&, const Tensor& v) { return loss(agreement(uhat, v)); };
    CHECK(finite_diff_check(fa, uhat, kEps) < kTol);
    CHECK(finite_diff_check(fvc, caps, kEps) < kTol);

    auto fn = [&](Graph&, const Tensor& v) { return ops::sum(vector_norms(v)); };
    CHECK(finite_diff_check(fn, caps, kEps) < kTol);
  }
}

TEST_CASE("gradient flows through the full unrolled routing loop") {
  Tensor uhat = random_tensor({1, 2, 2, 2}, 30);
  for (RoutingMode mode : {RoutingMode::FanOut, RoutingMode::FanIn}) {
    auto f = [mode](Graph&, const Tensor& v) {
      RouteResult r = route(v, mode, 3);
      return ops::sum(ops::mul(r.output, r.output));
    };
    CHECK(finite_diff_check(f, uhat, kEps) < kTol);
  }
}

TEST_CASE("margin loss of a routed two-unit instance passes the gradient check") {
  Tensor u = random_tensor({2, 4, 3}, 31);
  Tensor w = random_tensor({4, 3, 4, 3}, 32);
  std::vector<int> labels = {1, 2};
  auto f = [&](Graph&, const Tensor& v) {
    RouteResult r = route(predict(squash(u), v), RoutingMode::FanIn, 3);
    return margin_loss(capsule_lengths(r.output), labels);
  };
  CHECK(finite_diff_check(f, w, kEps) < kTol);
}

TEST_CASE("reconstruction loss gradient") {
  Tensor recon = random_tensor({2, 6}, 33, 0.05, 0.95);
  Tensor target = random_tensor({2, 6}, 34, 0.0, 1.0);
  auto f = [&](Graph&, const Tensor& v) { return reconstruction_loss(v, target); };
  CHECK(finite_diff_check(f, recon, kEps) < kTol);
}
