#include "pathcaps/adam.hpp"

#include <cmath>

#include "pathcaps/errors.hpp"

namespace pathcaps {

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& name : params.names()) {
    m_.add(name, Tensor(params.at(name).shape()));
    v_.add(name, Tensor(params.at(name).shape()));
  }
}

void AdamState::step(ParamStore& params) {
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& name : m_.names()) {
    Tensor& p = params.at(name);
    if (!p.has_grad())
      throw ContractError("adam step: parameter '" + name + "' has no gradient");
    auto& pv = p.values();
    const auto& g = p.grad();
    auto& m = m_.at(name).values();
    auto& v = v_.at(name).values();
    for (size_t i = 0; i < pv.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      pv[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace pathcaps
