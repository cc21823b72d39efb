#pragma once

#include <cstdint>
#include <vector>

#include "pathcaps/graph.hpp"
#include "pathcaps/tensor.hpp"

namespace pathcaps::ops {

// 2-D cross-correlation plus per-channel bias.
// input [b,c_in,h,w], kernel [c_out,c_in,k,k], bias [c_out] -> [b,c_out,h',w']
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int64_t padding,
              int64_t stride);

// Max pooling; backward routes gradient to the recorded argmax (first in
// row-major window order on ties). argmax_out, when given, receives the
// within-plane flat offsets.
Tensor maxpool2d(const Tensor& input, int64_t k, int64_t stride,
                 std::vector<int32_t>* argmax_out = nullptr);

// input [b,n], weight [m,n], bias [m] -> [b,m]
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Numerically stable softmax along `axis`; slices sum to 1.
Tensor softmax_axis(const Tensor& input, int64_t axis);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& x, double c);
Tensor sum(const Tensor& x);  // -> scalar

// Scales every row (axis-0 slice) by its own constant factor.
Tensor scale_rows(const Tensor& x, const std::vector<double>& row_scales);

Tensor reshape(const Tensor& x, Shape shape);

// [b, G*dim, H, W] -> [b, G*H*W, dim]: each dim-sized channel group becomes
// one capsule per spatial cell; units ordered group-major then row-major.
Tensor capsule_grid(const Tensor& x, int64_t dim);

// Concatenates [b, n_i, d] blocks along the unit axis, in argument order.
Tensor concat_units(const std::vector<Tensor>& parts);

// Zeroes all capsules except the selected one per sample and flattens:
// caps [b, n, d], selected[b] -> [b, n*d]
Tensor select_capsule_mask(const Tensor& caps, const std::vector<int64_t>& selected);

}  // namespace pathcaps::ops
