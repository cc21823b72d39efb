#pragma once

#include <cstdint>

namespace pathcaps::kernels {

// Global switch between the OpenMP drivers and the serial reference drivers.
// Both call the same per-slice routines, so outputs are bitwise identical;
// the serial path is kept as the reference for tests and benchmarks.
void set_parallel(bool enabled);
bool parallel_enabled();

struct Conv2dDims {
  int64_t batch = 0, c_in = 0, h = 0, w = 0;
  int64_t c_out = 0, k = 0, pad = 0, stride = 1;
  int64_t oh = 0, ow = 0;
};

// out[b,co,oy,ox] = bias[co] + sum_{ci,ky,kx} in[b,ci,oy*s+ky-p,ox*s+kx-p] * ker[co,ci,ky,kx]
void conv2d_forward(const double* in, const double* ker, const double* bias, double* out,
                    const Conv2dDims& d);
// All backward kernels accumulate (+=) into the gradient buffers.
void conv2d_backward_input(const double* gout, const double* ker, double* gin,
                           const Conv2dDims& d);
void conv2d_backward_kernel(const double* gout, const double* in, double* gker,
                            const Conv2dDims& d);
void conv2d_backward_bias(const double* gout, double* gbias, const Conv2dDims& d);

struct Pool2dDims {
  int64_t batch = 0, c = 0, h = 0, w = 0;
  int64_t k = 0, stride = 1;
  int64_t oh = 0, ow = 0;
};

// argmax records the within-plane flat offset of each window maximum;
// ties keep the first position in row-major window order.
void maxpool2d_forward(const double* in, double* out, int32_t* argmax, const Pool2dDims& d);
void maxpool2d_backward(const double* gout, const int32_t* argmax, double* gin,
                        const Pool2dDims& d);

// out[b,m] = bias[m] + sum_n in[b,n] * wt[m,n]
void dense_forward(const double* in, const double* wt, const double* bias, double* out,
                   int64_t batch, int64_t n, int64_t m);
void dense_backward_input(const double* gout, const double* wt, double* gin, int64_t batch,
                          int64_t n, int64_t m);
void dense_backward_weight(const double* gout, const double* in, double* gwt, int64_t batch,
                           int64_t n, int64_t m);
void dense_backward_bias(const double* gout, double* gbias, int64_t batch, int64_t m);

// uhat[b,i,j,:] = W[i,j] (d_out x d_in) * u[b,i,:]
void predict_forward(const double* u, const double* w, double* uhat, int64_t batch,
                     int64_t n_in, int64_t n_out, int64_t d_out, int64_t d_in);
void predict_backward_u(const double* guhat, const double* w, double* gu, int64_t batch,
                        int64_t n_in, int64_t n_out, int64_t d_out, int64_t d_in);
void predict_backward_w(const double* guhat, const double* u, double* gw, int64_t batch,
                        int64_t n_in, int64_t n_out, int64_t d_out, int64_t d_in);

// s[b,j,:] = sum_i c[b,i,j] * uhat[b,i,j,:]
void vote_sum_forward(const double* c, const double* uhat, double* s, int64_t batch,
                      int64_t n_in, int64_t n_out, int64_t d);
void vote_sum_backward_c(const double* gs, const double* uhat, double* gc, int64_t batch,
                         int64_t n_in, int64_t n_out, int64_t d);
void vote_sum_backward_uhat(const double* gs, const double* c, double* guhat, int64_t batch,
                            int64_t n_in, int64_t n_out, int64_t d);

// dot[b,i,j] = sum_d uhat[b,i,j,d] * v[b,j,d]
void agreement_forward(const double* uhat, const double* v, double* dot, int64_t batch,
                       int64_t n_in, int64_t n_out, int64_t d);
void agreement_backward_uhat(const double* gdot, const double* v, double* guhat, int64_t batch,
                             int64_t n_in, int64_t n_out, int64_t d);
void agreement_backward_v(const double* gdot, const double* uhat, double* gv, int64_t batch,
                          int64_t n_in, int64_t n_out, int64_t d);

}  // namespace pathcaps::kernels

namespace pathcaps::testing {
// Gradient-check negative control: scales the conv bias gradient when set.
extern bool corrupt_conv_bias_backward;
}  // namespace pathcaps::testing
