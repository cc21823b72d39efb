#include "doctest.h"

#include "pathcaps/errors.hpp"
#include "pathcaps/graph.hpp"
#include "pathcaps/ops.hpp"
#include "pathcaps/tensor.hpp"

using namespace pathcaps;

TEST_CASE("tensor construction and shape bookkeeping") {
  Tensor t(Shape{2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 3);
  for (double v : t.values()) CHECK(v == 0.0);

  CHECK_THROWS_AS(Tensor(Shape{2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK(Tensor::scalar(4.5).scalar_value() == 4.5);
  CHECK_THROWS_AS(Tensor(Shape{2}, {1.0, 2.0}).scalar_value(), ContractError);

  Tensor f = Tensor::full(Shape{4}, 2.5);
  for (double v : f.values()) CHECK(v == 2.5);
}

TEST_CASE("tensor handles share storage, detached copies do not") {
  Tensor a(Shape{2}, {1.0, 2.0});
  Tensor alias = a;
  alias.values()[0] = 9.0;
  CHECK(a.values()[0] == 9.0);

  Tensor copy = a.detached_copy();
  copy.values()[0] = -1.0;
  CHECK(a.values()[0] == 9.0);
}

TEST_CASE("backward: loss = sum(x) gives unit gradients") {
  Graph g;
  Tensor x(Shape{3}, {5.0, -2.0, 0.5});
  g.watch(x);
  Tensor loss = ops::sum(x);
  g.backward(loss);
  for (double v : x.grad()) CHECK(v == 1.0);
}

TEST_CASE("backward: loss = sum(x*x) at [1,2] gives [2,4]") {
  Graph g;
  Tensor x(Shape{2}, {1.0, 2.0});
  g.watch(x);
  Tensor loss = ops::sum(ops::mul(x, x));
  g.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward contract violations are rejected") {
  Graph g;
  Tensor x(Shape{2}, {1.0, 2.0});
  g.watch(x);
  Tensor y = ops::mul(x, x);

  SUBCASE("non-scalar loss") { CHECK_THROWS_AS(g.backward(y), ContractError); }
  SUBCASE("loss from another graph") {
    Graph other;
    Tensor z = Tensor::scalar(1.0);
    other.watch(z);
    CHECK_THROWS_AS(g.backward(z), ContractError);
  }
  SUBCASE("repeated backward") {
    Tensor loss = ops::sum(y);
    g.backward(loss);
    CHECK_THROWS_AS(g.backward(loss), ContractError);
  }
}

TEST_CASE("a tensor belongs to at most one graph at a time") {
  Tensor x(Shape{2}, {1.0, 2.0});
  {
    Graph g1;
    g1.watch(x);
    CHECK(x.graph() == &g1);
    CHECK_NOTHROW(g1.watch(x));  // idempotent on the same graph
    Graph g2;
    CHECK_THROWS_AS(g2.watch(x), ContractError);
  }
  // graph destruction detaches registered tensors
  CHECK(x.graph() == nullptr);
  Graph g3;
  CHECK_NOTHROW(g3.watch(x));
}

TEST_CASE("ops reject inputs from two different graphs") {
  Graph g1, g2;
  Tensor a(Shape{2}, {1.0, 2.0});
  Tensor b(Shape{2}, {3.0, 4.0});
  g1.watch(a);
  g2.watch(b);
  CHECK_THROWS_AS(ops::add(a, b), ContractError);
}

TEST_CASE("constants flow through ops without joining a graph") {
  Tensor a(Shape{2}, {1.0, 2.0});
  Tensor b(Shape{2}, {3.0, 4.0});
  Tensor c = ops::add(a, b);  // no graph anywhere
  CHECK(c.graph() == nullptr);
  CHECK(c.values()[0] == 4.0);

  Graph g;
  g.watch(a);
  Tensor d = ops::add(a, b);
  Tensor loss = ops::sum(d);
  g.backward(loss);
  CHECK(a.grad()[0] == 1.0);
  CHECK_FALSE(b.has_grad());  // constant input stays gradient-free
}

TEST_CASE("every tensor reachable from the loss ends up with a populated grad") {
  Graph g;
  Tensor a(Shape{2}, {1.0, 2.0});
  Tensor b(Shape{2}, {3.0, 4.0});
  g.watch(a);
  g.watch(b);
  Tensor mid = ops::mul(a, b);
  Tensor loss = ops::sum(mid);
  g.backward(loss);
  CHECK(a.has_grad());
  CHECK(b.has_grad());
  CHECK(mid.has_grad());
  CHECK(a.grad()[1] == doctest::Approx(4.0));  // d(sum ab)/da = b
  CHECK(b.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("gradients accumulate across multiple uses of one tensor") {
  Graph g;
  Tensor x(Shape{1}, {3.0});
  g.watch(x);
  Tensor loss = ops::sum(ops::add(ops::mul(x, x), x));  // x^2 + x
  g.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(7.0));  // 2x + 1
}
