#include "pathcaps/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "pathcaps/errors.hpp"
#include "pathcaps/kernels.hpp"

namespace pathcaps::ops {

namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

std::vector<double>& grad_buf(const Impl& t) {
  if (t->grad.empty()) t->grad.assign(t->value.size(), 0.0);
  return t->grad;
}

bool on_graph(const Impl& t) { return t->node >= 0; }

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int64_t padding,
              int64_t stride) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  require_rank(bias, 1, "conv2d bias");
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  if (padding < 0) throw ContractError("conv2d: padding must be >= 0");
  if (kernel.dim(2) != kernel.dim(3))
    throw ShapeError("conv2d: kernel must be square, got " + shape_str(kernel.shape()));
  if (kernel.dim(1) != input.dim(1))
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                     " input channels, input has " + std::to_string(input.dim(1)));
  if (bias.dim(0) != kernel.dim(0))
    throw ShapeError("conv2d: bias has " + std::to_string(bias.dim(0)) + " entries for " +
                     std::to_string(kernel.dim(0)) + " output channels");

  kernels::Conv2dDims d;
  d.batch = input.dim(0);
  d.c_in = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.c_out = kernel.dim(0);
  d.k = kernel.dim(2);
  d.pad = padding;
  d.stride = stride;
  if (d.k > d.h + 2 * d.pad || d.k > d.w + 2 * d.pad)
    throw ShapeError("conv2d: kernel " + std::to_string(d.k) + " exceeds padded input " +
                     shape_str(input.shape()));
  d.oh = (d.h + 2 * d.pad - d.k) / d.stride + 1;
  d.ow = (d.w + 2 * d.pad - d.k) / d.stride + 1;

  Tensor out(Shape{d.batch, d.c_out, d.oh, d.ow});
  kernels::conv2d_forward(input.values().data(), kernel.values().data(), bias.values().data(),
                          out.values().data(), d);

  Graph* g = Graph::common_graph({&input, &kernel, &bias});
  if (!g) return out;
  Impl xi = share_impl(input), ki = share_impl(kernel), bi = share_impl(bias),
       oi = share_impl(out);
  g->emit(out, [xi, ki, bi, oi, d] {
    const double* go = oi->grad.data();
    if (on_graph(xi))
      kernels::conv2d_backward_input(go, ki->value.data(), grad_buf(xi).data(), d);
    if (on_graph(ki))
      kernels::conv2d_backward_kernel(go, xi->value.data(), grad_buf(ki).data(), d);
    if (on_graph(bi)) kernels::conv2d_backward_bias(go, grad_buf(bi).data(), d);
  });
  return out;
}

Tensor maxpool2d(const Tensor& input, int64_t k, int64_t stride,
                 std::vector<int32_t>* argmax_out) {
  require_rank(input, 4, "maxpool2d input");
  if (k < 1 || stride < 1) throw ContractError("maxpool2d: k and stride must be >= 1");
  kernels::Pool2dDims d;
  d.batch = input.dim(0);
  d.c = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.k = k;
  d.stride = stride;
  if (k > d.h || k > d.w)
    throw ShapeError("maxpool2d: window " + std::to_string(k) + " exceeds input " +
                     shape_str(input.shape()));
  if (k == stride && (d.h % k != 0 || d.w % k != 0))
    throw ShapeError("maxpool2d: input " + shape_str(input.shape()) +
                     " not divisible by non-overlapping window " + std::to_string(k));
  d.oh = (d.h - d.k) / d.stride + 1;
  d.ow = (d.w - d.k) / d.stride + 1;

  Tensor out(Shape{d.batch, d.c, d.oh, d.ow});
  auto argmax = std::make_shared<std::vector<int32_t>>(out.values().size());
  kernels::maxpool2d_forward(input.values().data(), out.values().data(), argmax->data(), d);
  if (argmax_out) *argmax_out = *argmax;

  Graph* g = Graph::common_graph({&input});
  if (!g) return out;
  Impl xi = share_impl(input), oi = share_impl(out);
  g->emit(out, [xi, oi, argmax, d] {
    if (on_graph(xi))
      kernels::maxpool2d_backward(oi->grad.data(), argmax->data(), grad_buf(xi).data(), d);
  });
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weight, 2, "dense weight");
  require_rank(bias, 1, "dense bias");
  int64_t batch = input.dim(0), n = input.dim(1), m = weight.dim(0);
  if (weight.dim(1) != n)
    throw ShapeError("dense: weight expects " + std::to_string(weight.dim(1)) +
                     " features, input has " + std::to_string(n));
  if (bias.dim(0) != m)
    throw ShapeError("dense: bias has " + std::to_string(bias.dim(0)) + " entries for " +
                     std::to_string(m) + " outputs");

  Tensor out(Shape{batch, m});
  kernels::dense_forward(input.values().data(), weight.values().data(), bias.values().data(),
                         out.values().data(), batch, n, m);

  Graph* g = Graph::common_graph({&input, &weight, &bias});
  if (!g) return out;
  Impl xi = share_impl(input), wi = share_impl(weight), bi = share_impl(bias),
       oi = share_impl(out);
  g->emit(out, [xi, wi, bi, oi, batch, n, m] {
    const double* go = oi->grad.data();
    if (on_graph(xi))
      kernels::dense_backward_input(go, wi->value.data(), grad_buf(xi).data(), batch, n, m);
    if (on_graph(wi))
      kernels::dense_backward_weight(go, xi->value.data(), grad_buf(wi).data(), batch, n, m);
    if (on_graph(bi)) kernels::dense_backward_bias(go, grad_buf(bi).data(), batch, m);
  });
  return out;
}

Tensor softmax_axis(const Tensor& input, int64_t axis) {
  if (axis < 0 || axis >= static_cast<int64_t>(input.rank()))
    throw ShapeError("softmax_axis: axis " + std::to_string(axis) + " invalid for " +
                     shape_str(input.shape()));
  const Shape& s = input.shape();
  int64_t n = s[static_cast<size_t>(axis)];
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];

  Tensor out(s);
  const auto& x = input.values();
  auto& y = out.values();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      int64_t base = o * n * inner + in;
      double mx = x[base];
      for (int64_t t = 1; t < n; ++t) mx = std::max(mx, x[base + t * inner]);
      double total = 0.0;
      for (int64_t t = 0; t < n; ++t) {
        double e = std::exp(x[base + t * inner] - mx);
        y[base + t * inner] = e;
        total += e;
      }
      double inv = 1.0 / total;
      for (int64_t t = 0; t < n; ++t) y[base + t * inner] *= inv;
    }
  }

  Graph* g = Graph::common_graph({&input});
  if (!g) return out;
  Impl xi = share_impl(input), oi = share_impl(out);
  g->emit(out, [xi, oi, outer, n, inner] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    const auto& gy = oi->grad;
    const auto& y = oi->value;
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t in = 0; in < inner; ++in) {
        int64_t base = o * n * inner + in;
        double dot = 0.0;
        for (int64_t t = 0; t < n; ++t) dot += gy[base + t * inner] * y[base + t * inner];
        for (int64_t t = 0; t < n; ++t) {
          int64_t idx = base + t * inner;
          gx[idx] += y[idx] * (gy[idx] - dot);
        }
      }
    }
  });
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& yv = out.values();
  for (size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  Graph* g = Graph::common_graph({&x});
  if (!g) return out;
  Impl xi = share_impl(x), oi = share_impl(out);
  g->emit(out, [xi, oi] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i)
      if (xi->value[i] > 0.0) gx[i] += oi->grad[i];
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& yv = out.values();
  for (size_t i = 0; i < xv.size(); ++i) {
    double v = xv[i];
    yv[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  Graph* g = Graph::common_graph({&x});
  if (!g) return out;
  Impl xi = share_impl(x), oi = share_impl(out);
  g->emit(out, [xi, oi] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i) {
      double y = oi->value[i];
      gx[i] += oi->grad[i] * y * (1.0 - y);
    }
  });
  return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                          Bwd bwd) {
  require_same_shape(a, b, name);
  Tensor out(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& yv = out.values();
  for (size_t i = 0; i < av.size(); ++i) yv[i] = fwd(av[i], bv[i]);
  Graph* g = Graph::common_graph({&a, &b});
  if (!g) return out;
  Impl ai = share_impl(a), bi = share_impl(b), oi = share_impl(out);
  g->emit(out, [ai, bi, oi, bwd] { bwd(ai, bi, oi); });
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](const Impl& ai, const Impl& bi, const Impl& oi) {
        if (on_graph(ai)) {
          auto& ga = grad_buf(ai);
          for (size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i];
        }
        if (on_graph(bi)) {
          auto& gb = grad_buf(bi);
          for (size_t i = 0; i < gb.size(); ++i) gb[i] += oi->grad[i];
        }
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](const Impl& ai, const Impl& bi, const Impl& oi) {
        if (on_graph(ai)) {
          auto& ga = grad_buf(ai);
          for (size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i];
        }
        if (on_graph(bi)) {
          auto& gb = grad_buf(bi);
          for (size_t i = 0; i < gb.size(); ++i) gb[i] -= oi->grad[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](const Impl& ai, const Impl& bi, const Impl& oi) {
        if (on_graph(ai)) {
          auto& ga = grad_buf(ai);
          for (size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i] * bi->value[i];
        }
        if (on_graph(bi)) {
          auto& gb = grad_buf(bi);
          for (size_t i = 0; i < gb.size(); ++i) gb[i] += oi->grad[i] * ai->value[i];
        }
      });
}

Tensor scale(const Tensor& x, double c) {
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& yv = out.values();
  for (size_t i = 0; i < xv.size(); ++i) yv[i] = c * xv[i];
  Graph* g = Graph::common_graph({&x});
  if (!g) return out;
  Impl xi = share_impl(x), oi = share_impl(out);
  g->emit(out, [xi, oi, c] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += c * oi->grad[i];
  });
  return out;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor out = Tensor::scalar(total);
  Graph* g = Graph::common_graph({&x});
  if (!g) return out;
  Impl xi = share_impl(x), oi = share_impl(out);
  g->emit(out, [xi, oi] {
    if (!on_graph(xi)) return;
    double go = oi->grad[0];
    auto& gx = grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += go;
  });
  return out;
}

Tensor scale_rows(const Tensor& x, const std::vector<double>& row_scales) {
  if (x.rank() < 1) throw ShapeError("scale_rows: scalar input");
  if (static_cast<int64_t>(row_scales.size()) != x.dim(0))
    throw ShapeError("scale_rows: " + std::to_string(row_scales.size()) + " factors for " +
                     std::to_string(x.dim(0)) + " rows");
  int64_t rows = x.dim(0);
  int64_t row_len = rows ? x.numel() / rows : 0;
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& yv = out.values();
  for (int64_t r = 0; r < rows; ++r) {
    double s = row_scales[static_cast<size_t>(r)];
    for (int64_t i = 0; i < row_len; ++i) yv[r * row_len + i] = s * xv[r * row_len + i];
  }
  Graph* g = Graph::common_graph({&x});
  if (!g) return out;
  Impl xi = share_impl(x), oi = share_impl(out);
  g->emit(out, [xi, oi, row_scales, rows, row_len] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    for (int64_t r = 0; r < rows; ++r) {
      double s = row_scales[static_cast<size_t>(r)];
      for (int64_t i = 0; i < row_len; ++i) gx[r * row_len + i] += s * oi->grad[r * row_len + i];
    }
  });
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                     " changes element count");
  Tensor out(std::move(shape), x.values());
  Graph* g = Graph::common_graph({&x});
  if (!g) return out;
  Impl xi = share_impl(x), oi = share_impl(out);
  g->emit(out, [xi, oi] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += oi->grad[i];
  });
  return out;
}

Tensor capsule_grid(const Tensor& x, int64_t dim) {
  require_rank(x, 4, "capsule_grid input");
  if (dim < 1 || x.dim(1) % dim != 0)
    throw ShapeError("capsule_grid: " + std::to_string(x.dim(1)) +
                     " channels not divisible into capsules of dim " + std::to_string(dim));
  int64_t b = x.dim(0), groups = x.dim(1) / dim, h = x.dim(2), w = x.dim(3);
  int64_t units = groups * h * w;
  Tensor out(Shape{b, units, dim});
  const auto& xv = x.values();
  auto& yv = out.values();
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t gidx = 0; gidx < groups; ++gidx)
      for (int64_t d = 0; d < dim; ++d) {
        const double* src = xv.data() + ((bi * groups * dim) + gidx * dim + d) * h * w;
        for (int64_t cell = 0; cell < h * w; ++cell)
          yv[(bi * units + gidx * h * w + cell) * dim + d] = src[cell];
      }

  Graph* g = Graph::common_graph({&x});
  if (!g) return out;
  Impl xi = share_impl(x), oi = share_impl(out);
  g->emit(out, [xi, oi, b, groups, dim, h, w, units] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    const auto& gy = oi->grad;
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t gidx = 0; gidx < groups; ++gidx)
        for (int64_t d = 0; d < dim; ++d) {
          double* dst = gx.data() + ((bi * groups * dim) + gidx * dim + d) * h * w;
          for (int64_t cell = 0; cell < h * w; ++cell)
            dst[cell] += gy[(bi * units + gidx * h * w + cell) * dim + d];
        }
  });
  return out;
}

Tensor concat_units(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_units: no inputs");
  require_rank(parts[0], 3, "concat_units input");
  int64_t b = parts[0].dim(0), d = parts[0].dim(2);
  int64_t total = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 3, "concat_units input");
    if (p.dim(0) != b || p.dim(2) != d)
      throw ShapeError("concat_units: inconsistent block shape " + shape_str(p.shape()));
    total += p.dim(1);
  }
  Tensor out(Shape{b, total, d});
  auto& yv = out.values();
  int64_t offset = 0;
  for (const Tensor& p : parts) {
    int64_t n = p.dim(1);
    const auto& pv = p.values();
    for (int64_t bi = 0; bi < b; ++bi)
      std::copy(pv.begin() + bi * n * d, pv.begin() + (bi + 1) * n * d,
                yv.begin() + (bi * total + offset) * d);
    offset += n;
  }

  Graph* g = nullptr;
  for (const Tensor& p : parts) {
    Graph* pg = p.graph();
    if (pg == nullptr) continue;
    if (g == nullptr)
      g = pg;
    else if (g != pg)
      throw ContractError("concat_units: inputs belong to different graphs");
  }
  if (!g) return out;

  std::vector<Impl> impls;
  impls.reserve(parts.size());
  for (const Tensor& p : parts) impls.push_back(share_impl(p));
  Impl oi = share_impl(out);
  g->emit(out, [impls, oi, b, d, total] {
    const auto& gy = oi->grad;
    int64_t offset = 0;
    for (const Impl& pi : impls) {
      int64_t n = pi->shape[1];
      if (on_graph(pi)) {
        auto& gp = grad_buf(pi);
        for (int64_t bi = 0; bi < b; ++bi) {
          const double* src = gy.data() + (bi * total + offset) * d;
          double* dst = gp.data() + bi * n * d;
          for (int64_t i = 0; i < n * d; ++i) dst[i] += src[i];
        }
      }
      offset += n;
    }
  });
  return out;
}

Tensor select_capsule_mask(const Tensor& caps, const std::vector<int64_t>& selected) {
  require_rank(caps, 3, "select_capsule_mask input");
  int64_t b = caps.dim(0), n = caps.dim(1), d = caps.dim(2);
  if (static_cast<int64_t>(selected.size()) != b)
    throw ContractError("select_capsule_mask: " + std::to_string(selected.size()) +
                        " selections for batch " + std::to_string(b));
  for (int64_t s : selected)
    if (s < 0 || s >= n)
      throw ContractError("select_capsule_mask: capsule index " + std::to_string(s) +
                          " out of range [0," + std::to_string(n) + ")");

  Tensor out(Shape{b, n * d});
  const auto& xv = caps.values();
  auto& yv = out.values();
  for (int64_t bi = 0; bi < b; ++bi) {
    int64_t sel = selected[static_cast<size_t>(bi)];
    for (int64_t x = 0; x < d; ++x)
      yv[bi * n * d + sel * d + x] = xv[(bi * n + sel) * d + x];
  }

  Graph* g = Graph::common_graph({&caps});
  if (!g) return out;
  Impl xi = share_impl(caps), oi = share_impl(out);
  g->emit(out, [xi, oi, selected, n, d, b] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    const auto& gy = oi->grad;
    for (int64_t bi = 0; bi < b; ++bi) {
      int64_t sel = selected[static_cast<size_t>(bi)];
      for (int64_t x = 0; x < d; ++x)
        gx[(bi * n + sel) * d + x] += gy[bi * n * d + sel * d + x];
    }
  });
  return out;
}

}  // namespace pathcaps::ops
