#pragma once

#include <cstdint>

#include "pathcaps/graph.hpp"
#include "pathcaps/tensor.hpp"

namespace pathcaps {

// Softmax normalization axis for the coupling coefficients: FanOut normalizes
// each input capsule's couplings across output capsules; FanIn normalizes
// each output capsule's couplings across input capsules.
enum class RoutingMode { FanOut, FanIn };

const char* routing_mode_name(RoutingMode mode);

// Snapshot of the final routing iteration (values only, detached).
struct RoutingState {
  Tensor logits;     // [batch, n_in, n_out]
  Tensor couplings;  // [batch, n_in, n_out]
  int iterations = 0;
};

struct RouteResult {
  Tensor output;  // [batch, n_out, d] squashed output capsules
  RoutingState state;
};

// Norm-shrinking nonlinearity over the last axis: s * |s|/(1+|s|^2) with an
// epsilon-guarded norm so the zero vector maps to zero differentiably.
Tensor squash(const Tensor& s);

// Euclidean norm of each capsule vector (last axis), same epsilon guard.
Tensor vector_norms(const Tensor& caps);

// caps [b, n, d] -> [b, n]
Tensor capsule_lengths(const Tensor& caps);

// Prediction vectors: u [b, n_in, d_in], W [n_in, n_out, d_out, d_in]
// -> uhat [b, n_in, n_out, d_out], uhat[b,i,j] = W[i,j] * u[b,i].
Tensor predict(const Tensor& u, const Tensor& transform);

// Coupling coefficients from logits [b, n_in, n_out] under the given mode.
Tensor couplings(const Tensor& logits, RoutingMode mode);

// Weighted vote sum: c [b,n_in,n_out], uhat [b,n_in,n_out,d] -> s [b,n_out,d].
Tensor weighted_vote_sum(const Tensor& c, const Tensor& uhat);

// Dot-product agreement: uhat [b,n_in,n_out,d], v [b,n_out,d] -> [b,n_in,n_out].
Tensor agreement(const Tensor& uhat, const Tensor& v);

// Dynamic routing by agreement, unrolled. Logits start at zero; each
// iteration computes couplings, the weighted vote sum and squash; the logit
// update is skipped after the last iteration. Gradients flow through the
// whole unrolled loop.
RouteResult route(const Tensor& uhat, RoutingMode mode, int iterations);

}  // namespace pathcaps
