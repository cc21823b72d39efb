#pragma once

#include <functional>
#include <vector>

#include "pathcaps/graph.hpp"
#include "pathcaps/tensor.hpp"

namespace pathcaps {

// A scalar-valued function of one tensor; everything else it uses is closed
// over as constants. The graph argument is the tape the evaluation runs on.
using TensorFn = std::function<Tensor(Graph&, const Tensor&)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// eps must lie in [1e-7, 1e-4].
double finite_diff_check(const TensorFn& f, const Tensor& x, double eps);

// Same check restricted to the given flat coordinates (for large tensors).
double finite_diff_check_sampled(const TensorFn& f, const Tensor& x, double eps,
                                 const std::vector<int64_t>& coords);

}  // namespace pathcaps
