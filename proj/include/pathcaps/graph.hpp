#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "pathcaps/tensor.hpp"

namespace pathcaps {

// Reverse-mode tape. One graph per forward pass: leaves (parameters, inputs)
// are registered with watch(), ops append nodes in construction order, and
// backward() walks the tape once in reverse. Construction and backward are
// single-threaded per graph; distinct graphs are independent.
class Graph {
 public:
  Graph() = default;
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Register a leaf tensor (parameter or input). Clears any stale grad.
  // Idempotent for tensors already on this graph; a tensor on another live
  // graph is rejected.
  Tensor watch(const Tensor& t);

  // Populate grads of everything reachable from `loss` (a scalar on this
  // graph). A second call on the same graph is rejected.
  void backward(const Tensor& loss);

  bool backward_done() const { return backward_done_; }
  size_t size() const { return nodes_.size(); }

  // Op plumbing: register `out` as produced by a node whose reverse rule is
  // `back`. `back` must accumulate (+=) into the grads of the node's inputs.
  void emit(const Tensor& out, std::function<void()> back);

  // The single graph the listed tensors live on (nullptr when none do);
  // tensors from two different graphs are rejected.
  static Graph* common_graph(std::initializer_list<const Tensor*> tensors);

 private:
  struct Node {
    std::shared_ptr<detail::TensorImpl> out;
    std::function<void()> back;  // null for leaves
  };
  void attach(const Tensor& t, std::function<void()> back);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace pathcaps
