#include "pathcaps/capsules.hpp"

#include <cmath>
#include <memory>

#include "pathcaps/errors.hpp"
#include "pathcaps/kernels.hpp"
#include "pathcaps/ops.hpp"

namespace pathcaps {

namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

constexpr double kNormEps = 1e-12;

std::vector<double>& grad_buf(const Impl& t) {
  if (t->grad.empty()) t->grad.assign(t->value.size(), 0.0);
  return t->grad;
}

bool on_graph(const Impl& t) { return t->node >= 0; }

}  // namespace

const char* routing_mode_name(RoutingMode mode) {
  return mode == RoutingMode::FanOut ? "fan-out" : "fan-in";
}

Tensor squash(const Tensor& s) {
  if (s.rank() < 1) throw ShapeError("squash: scalar input");
  int64_t d = s.dim(s.rank() - 1);
  int64_t vecs = d ? s.numel() / d : 0;

  Tensor out(s.shape());
  const auto& x = s.values();
  auto& y = out.values();
  for (int64_t v = 0; v < vecs; ++v) {
    const double* sv = x.data() + v * d;
    double q = 0.0;
    for (int64_t i = 0; i < d; ++i) q += sv[i] * sv[i];
    double norm = std::sqrt(q + kNormEps);
    double f = norm / (1.0 + norm * norm);
    for (int64_t i = 0; i < d; ++i) y[v * d + i] = f * sv[i];
  }

  Graph* g = Graph::common_graph({&s});
  if (!g) return out;
  Impl xi = share_impl(s), oi = share_impl(out);
  g->emit(out, [xi, oi, vecs, d] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    const auto& gy = oi->grad;
    const auto& x = xi->value;
    for (int64_t v = 0; v < vecs; ++v) {
      const double* sv = x.data() + v * d;
      const double* gv = gy.data() + v * d;
      double q = 0.0, dot = 0.0;
      for (int64_t i = 0; i < d; ++i) {
        q += sv[i] * sv[i];
        dot += gv[i] * sv[i];
      }
      double norm = std::sqrt(q + kNormEps);
      double denom = 1.0 + norm * norm;
      double f = norm / denom;
      // d f / d norm = (1 - norm^2) / (1 + norm^2)^2
      double dfdn = (1.0 - norm * norm) / (denom * denom);
      double coef = dfdn / norm * dot;
      double* gxv = gx.data() + v * d;
      for (int64_t i = 0; i < d; ++i) gxv[i] += f * gv[i] + coef * sv[i];
    }
  });
  return out;
}

Tensor vector_norms(const Tensor& caps) {
  if (caps.rank() < 1) throw ShapeError("vector_norms: scalar input");
  int64_t d = caps.dim(caps.rank() - 1);
  int64_t vecs = d ? caps.numel() / d : 0;
  Shape out_shape(caps.shape().begin(), caps.shape().end() - 1);

  Tensor out(out_shape);
  const auto& x = caps.values();
  auto& y = out.values();
  for (int64_t v = 0; v < vecs; ++v) {
    double q = 0.0;
    for (int64_t i = 0; i < d; ++i) q += x[v * d + i] * x[v * d + i];
    y[v] = std::sqrt(q + kNormEps);
  }

  Graph* g = Graph::common_graph({&caps});
  if (!g) return out;
  Impl xi = share_impl(caps), oi = share_impl(out);
  g->emit(out, [xi, oi, vecs, d] {
    if (!on_graph(xi)) return;
    auto& gx = grad_buf(xi);
    for (int64_t v = 0; v < vecs; ++v) {
      double gn = oi->grad[v] / oi->value[v];
      for (int64_t i = 0; i < d; ++i) gx[v * d + i] += gn * xi->value[v * d + i];
    }
  });
  return out;
}

Tensor capsule_lengths(const Tensor& caps) {
  require_rank(caps, 3, "capsule_lengths input");
  return vector_norms(caps);
}

Tensor predict(const Tensor& u, const Tensor& transform) {
  require_rank(u, 3, "predict capsules");
  require_rank(transform, 4, "predict transform");
  int64_t batch = u.dim(0), n_in = u.dim(1), d_in = u.dim(2);
  int64_t n_out = transform.dim(1), d_out = transform.dim(2);
  if (transform.dim(0) != n_in)
    throw ShapeError("predict: transform covers " + std::to_string(transform.dim(0)) +
                     " input capsules, got " + std::to_string(n_in));
  if (transform.dim(3) != d_in)
    throw ShapeError("predict: transform expects capsule dim " +
                     std::to_string(transform.dim(3)) + ", got " + std::to_string(d_in));

  Tensor out(Shape{batch, n_in, n_out, d_out});
  kernels::predict_forward(u.values().data(), transform.values().data(), out.values().data(),
                           batch, n_in, n_out, d_out, d_in);

  Graph* g = Graph::common_graph({&u, &transform});
  if (!g) return out;
  Impl ui = share_impl(u), wi = share_impl(transform), oi = share_impl(out);
  g->emit(out, [ui, wi, oi, batch, n_in, n_out, d_out, d_in] {
    const double* go = oi->grad.data();
    if (on_graph(ui))
      kernels::predict_backward_u(go, wi->value.data(), grad_buf(ui).data(), batch, n_in, n_out,
                                  d_out, d_in);
    if (on_graph(wi))
      kernels::predict_backward_w(go, ui->value.data(), grad_buf(wi).data(), batch, n_in, n_out,
                                  d_out, d_in);
  });
  return out;
}

Tensor couplings(const Tensor& logits, RoutingMode mode) {
  require_rank(logits, 3, "couplings logits");
  switch (mode) {
    case RoutingMode::FanOut:
      return ops::softmax_axis(logits, 2);  // normalize across output capsules
    case RoutingMode::FanIn:
      return ops::softmax_axis(logits, 1);  // normalize across input capsules
  }
  throw ContractError("couplings: unknown routing mode");
}

Tensor weighted_vote_sum(const Tensor& c, const Tensor& uhat) {
  require_rank(c, 3, "weighted_vote_sum couplings");
  require_rank(uhat, 4, "weighted_vote_sum votes");
  int64_t batch = uhat.dim(0), n_in = uhat.dim(1), n_out = uhat.dim(2), d = uhat.dim(3);
  if (c.dim(0) != batch || c.dim(1) != n_in || c.dim(2) != n_out)
    throw ShapeError("weighted_vote_sum: couplings " + shape_str(c.shape()) +
                     " do not match votes " + shape_str(uhat.shape()));

  Tensor out(Shape{batch, n_out, d});
  kernels::vote_sum_forward(c.values().data(), uhat.values().data(), out.values().data(), batch,
                            n_in, n_out, d);

  Graph* g = Graph::common_graph({&c, &uhat});
  if (!g) return out;
  Impl ci = share_impl(c), hi = share_impl(uhat), oi = share_impl(out);
  g->emit(out, [ci, hi, oi, batch, n_in, n_out, d] {
    const double* go = oi->grad.data();
    if (on_graph(ci))
      kernels::vote_sum_backward_c(go, hi->value.data(), grad_buf(ci).data(), batch, n_in, n_out,
                                   d);
    if (on_graph(hi))
      kernels::vote_sum_backward_uhat(go, ci->value.data(), grad_buf(hi).data(), batch, n_in,
                                      n_out, d);
  });
  return out;
}

Tensor agreement(const Tensor& uhat, const Tensor& v) {
  require_rank(uhat, 4, "agreement votes");
  require_rank(v, 3, "agreement output capsules");
  int64_t batch = uhat.dim(0), n_in = uhat.dim(1), n_out = uhat.dim(2), d = uhat.dim(3);
  if (v.dim(0) != batch || v.dim(1) != n_out || v.dim(2) != d)
    throw ShapeError("agreement: capsules " + shape_str(v.shape()) + " do not match votes " +
                     shape_str(uhat.shape()));

  Tensor out(Shape{batch, n_in, n_out});
  kernels::agreement_forward(uhat.values().data(), v.values().data(), out.values().data(),
                             batch, n_in, n_out, d);

  Graph* g = Graph::common_graph({&uhat, &v});
  if (!g) return out;
  Impl hi = share_impl(uhat), vi = share_impl(v), oi = share_impl(out);
  g->emit(out, [hi, vi, oi, batch, n_in, n_out, d] {
    const double* go = oi->grad.data();
    if (on_graph(hi))
      kernels::agreement_backward_uhat(go, vi->value.data(), grad_buf(hi).data(), batch, n_in,
                                       n_out, d);
    if (on_graph(vi))
      kernels::agreement_backward_v(go, hi->value.data(), grad_buf(vi).data(), batch, n_in,
                                    n_out, d);
  });
  return out;
}

RouteResult route(const Tensor& uhat, RoutingMode mode, int iterations) {
  require_rank(uhat, 4, "route votes");
  if (iterations < 1) throw ContractError("route: iterations must be >= 1");
  int64_t batch = uhat.dim(0), n_in = uhat.dim(1), n_out = uhat.dim(2);

  Tensor logits(Shape{batch, n_in, n_out});  // zero-initialized every pass
  Tensor c, v;
  for (int it = 0; it < iterations; ++it) {
    c = couplings(logits, mode);
    Tensor s = weighted_vote_sum(c, uhat);
    v = squash(s);
    if (it + 1 < iterations) logits = ops::add(logits, agreement(uhat, v));
  }

  RouteResult result;
  result.output = v;
  result.state.logits = logits.detached_copy();
  result.state.couplings = c.detached_copy();
  result.state.iterations = iterations;
  return result;
}

}  // namespace pathcaps
