#include "pathcaps/params.hpp"

#include "pathcaps/errors.hpp"

namespace pathcaps {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (map_.count(name)) throw ContractError("parameter '" + name + "' already exists");
  order_.push_back(name);
  return map_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = map_.find(name);
  if (it == map_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = map_.find(name);
  if (it == map_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

int64_t ParamStore::total_scalars() const {
  int64_t n = 0;
  for (const auto& name : order_) n += map_.at(name).numel();
  return n;
}

void ParamStore::watch_all(Graph& g) {
  for (const auto& name : order_) g.watch(map_.at(name));
}

ParamStore ParamStore::with_replaced(const std::string& name, Tensor t) const {
  ParamStore out;
  bool found = false;
  for (const auto& n : order_) {
    if (n == name) {
      out.add(n, t);
      found = true;
    } else {
      out.add(n, map_.at(n));
    }
  }
  if (!found) throw ContractError("unknown parameter '" + name + "'");
  return out;
}

}  // namespace pathcaps
