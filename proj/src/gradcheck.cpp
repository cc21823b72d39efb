#include "pathcaps/gradcheck.hpp"

#include <cmath>
#include <numeric>

#include "pathcaps/errors.hpp"

namespace pathcaps {

namespace {

double eval_scalar(const TensorFn& f, const Tensor& x) {
  Graph g;
  Tensor y = f(g, x);
  if (y.numel() != 1)
    throw ContractError("finite_diff_check: f must be scalar-valued, got " +
                        shape_str(y.shape()));
  return y.values()[0];
}

}  // namespace

double finite_diff_check_sampled(const TensorFn& f, const Tensor& x, double eps,
                                 const std::vector<int64_t>& coords) {
  if (!(eps >= 1e-7 && eps <= 1e-4))
    throw ContractError("finite_diff_check: eps must be in [1e-7, 1e-4]");

  // Analytic gradient of f at x.
  Tensor probe = x.detached_copy();
  std::vector<double> analytic;
  {
    Graph g;
    g.watch(probe);
    Tensor y = f(g, probe);
    if (y.numel() != 1)
      throw ContractError("finite_diff_check: f must be scalar-valued, got " +
                          shape_str(y.shape()));
    g.backward(y);
    analytic = probe.grad();
  }

  double worst = 0.0;
  for (int64_t c : coords) {
    if (c < 0 || c >= x.numel())
      throw ContractError("finite_diff_check: coordinate " + std::to_string(c) +
                          " out of range");
    Tensor hi = x.detached_copy();
    hi.values()[static_cast<size_t>(c)] += eps;
    Tensor lo = x.detached_copy();
    lo.values()[static_cast<size_t>(c)] -= eps;
    double fd = (eval_scalar(f, hi) - eval_scalar(f, lo)) / (2.0 * eps);
    double a = analytic[static_cast<size_t>(c)];
    double err = std::abs(a - fd) / std::max(1.0, std::abs(a));
    worst = std::max(worst, err);
  }
  return worst;
}

double finite_diff_check(const TensorFn& f, const Tensor& x, double eps) {
  std::vector<int64_t> coords(static_cast<size_t>(x.numel()));
  std::iota(coords.begin(), coords.end(), 0);
  return finite_diff_check_sampled(f, x, eps, coords);
}

}  // namespace pathcaps
