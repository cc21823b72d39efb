#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "pathcaps/graph.hpp"
#include "pathcaps/tensor.hpp"

namespace pathcaps {

// Named parameter tensors in a stable insertion order (initialization draws
// and serialization both follow it).
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return map_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }
  int64_t total_scalars() const;

  // Registers every parameter as a leaf of the given graph.
  void watch_all(Graph& g);

  // Shallow copy (shared storage) with one entry's tensor replaced.
  ParamStore with_replaced(const std::string& name, Tensor t) const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> map_;
};

}  // namespace pathcaps
