#include "pathcaps/graph.hpp"

#include "pathcaps/errors.hpp"

namespace pathcaps {

Graph::~Graph() {
  for (Node& n : nodes_) {
    if (n.out) {
      n.out->graph = nullptr;
      n.out->node = -1;
    }
  }
}

void Graph::attach(const Tensor& t, std::function<void()> back) {
  auto* impl = impl_of(t);
  impl->graph = this;
  impl->node = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{share_impl(t), std::move(back)});
}

Tensor Graph::watch(const Tensor& t) {
  if (!t.defined()) throw ContractError("watch on an undefined tensor");
  auto* impl = impl_of(t);
  if (impl->graph == this) return t;
  if (impl->graph != nullptr)
    throw ContractError("tensor already belongs to another differentiation graph");
  impl->grad.clear();
  attach(t, nullptr);
  return t;
}

void Graph::emit(const Tensor& out, std::function<void()> back) {
  auto* impl = impl_of(out);
  if (impl->graph != nullptr)
    throw ContractError("op output is already registered on a graph");
  attach(out, std::move(back));
}

Graph* Graph::common_graph(std::initializer_list<const Tensor*> tensors) {
  Graph* g = nullptr;
  for (const Tensor* t : tensors) {
    Graph* tg = (*t).graph();
    if (tg == nullptr) continue;
    if (g == nullptr) {
      g = tg;
    } else if (g != tg) {
      throw ContractError("op inputs belong to different differentiation graphs");
    }
  }
  return g;
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.graph() != this)
    throw ContractError("backward: loss does not belong to this graph");
  if (loss.numel() != 1) throw ContractError("backward: loss must be a scalar");
  if (backward_done_) throw ContractError("backward already ran on this graph");

  loss.ensure_grad();
  loss.grad()[0] = 1.0;
  for (int i = loss.node(); i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.back) continue;
    if (n.out->grad.empty()) n.out->grad.assign(n.out->value.size(), 0.0);
    n.back();
  }
  backward_done_ = true;
  // Drop the closures (and the forward activations they capture).
  for (Node& n : nodes_) n.back = nullptr;
}

}  // namespace pathcaps
