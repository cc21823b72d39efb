#pragma once

#include <cstdint>

#include "pathcaps/params.hpp"

namespace pathcaps {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers mirror the parameter store by
// name; step() consumes the grads backward left on the parameters.
class AdamState {
 public:
  AdamState(const ParamStore& params, AdamConfig cfg = {});

  void step(ParamStore& params);
  int64_t t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  ParamStore& moments_m() { return m_; }
  ParamStore& moments_v() { return v_; }
  void restore_t(int64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  ParamStore m_;
  ParamStore v_;
  int64_t t_ = 0;
};

}  // namespace pathcaps
