#include "pathcaps/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <utility>

namespace pathcaps::testing {
bool corrupt_conv_bias_backward = false;
}  // namespace pathcaps::testing

namespace pathcaps::kernels {

namespace {

std::atomic<bool> g_parallel{true};

#if defined(__GNUC__) || defined(__clang__)
#define PATHCAPS_NOINLINE __attribute__((noinline))
#else
#define PATHCAPS_NOINLINE
#endif

// Runs fn(0..n-1) under the active driver. The slice routines below are
// noinline and shared by both drivers, so the parallel and serial paths
// execute identical per-element code and agree bitwise.
template <typename F>
void drive(int64_t n, const F& fn) {
  if (g_parallel.load(std::memory_order_relaxed)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) fn(i);
  } else {
    for (int64_t i = 0; i < n; ++i) fn(i);
  }
}

// Valid output-x range for a kernel column: 0 <= ox*stride + kx - pad < w.
inline std::pair<int64_t, int64_t> ox_range(int64_t kx, int64_t stride, int64_t pad,
                                            int64_t w, int64_t ow) {
  int64_t lo_num = pad - kx;
  int64_t lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  int64_t hi_num = w - 1 - kx + pad;
  int64_t hi = hi_num < 0 ? -1 : hi_num / stride;
  if (hi > ow - 1) hi = ow - 1;
  return {lo, hi};
}

// ---------------------------------------------------------------- conv2d --

// Single output row, handles image-boundary ky clipping.
PATHCAPS_NOINLINE void conv2d_fwd_row(const double* __restrict in,
                                      const double* __restrict ker, double bias,
                                      double* __restrict orow, int64_t oy,
                                      const Conv2dDims& d) {
  for (int64_t i = 0; i < d.ow; ++i) orow[i] = bias;
  for (int64_t ci = 0; ci < d.c_in; ++ci) {
    const double* iplane = in + ci * d.h * d.w;
    const double* kk = ker + ci * d.k * d.k;
    for (int64_t ky = 0; ky < d.k; ++ky) {
      int64_t iy = oy * d.stride + ky - d.pad;
      if (iy < 0 || iy >= d.h) continue;
      const double* irow = iplane + iy * d.w;
      for (int64_t kx = 0; kx < d.k; ++kx) {
        double wv = kk[ky * d.k + kx];
        auto [lo, hi] = ox_range(kx, d.stride, d.pad, d.w, d.ow);
        if (d.stride == 1) {
          const double* __restrict ir = irow + kx - d.pad;
          for (int64_t ox = lo; ox <= hi; ++ox) orow[ox] += wv * ir[ox];
        } else {
          for (int64_t ox = lo; ox <= hi; ++ox)
            orow[ox] += wv * irow[ox * d.stride + kx - d.pad];
        }
      }
    }
  }
}

// Four interior output rows at once (every ky in range): amortizes the
// per-(kx) setup over four fused accumulation streams. Summation order per
// element is ci, ky, kx ascending, same as the single-row path.
PATHCAPS_NOINLINE void conv2d_fwd_row4(const double* __restrict in,
                                       const double* __restrict ker, double bias,
                                       double* __restrict out, int64_t oy0,
                                       const Conv2dDims& d) {
  double* __restrict r0 = out + (oy0 + 0) * d.ow;
  double* __restrict r1 = out + (oy0 + 1) * d.ow;
  double* __restrict r2 = out + (oy0 + 2) * d.ow;
  double* __restrict r3 = out + (oy0 + 3) * d.ow;
  for (int64_t i = 0; i < d.ow; ++i) r0[i] = r1[i] = r2[i] = r3[i] = bias;
  for (int64_t ci = 0; ci < d.c_in; ++ci) {
    const double* iplane = in + ci * d.h * d.w;
    const double* kk = ker + ci * d.k * d.k;
    for (int64_t ky = 0; ky < d.k; ++ky) {
      int64_t iy = oy0 + ky - d.pad;
      const double* __restrict i0 = iplane + (iy + 0) * d.w;
      const double* __restrict i1 = iplane + (iy + 1) * d.w;
      const double* __restrict i2 = iplane + (iy + 2) * d.w;
      const double* __restrict i3 = iplane + (iy + 3) * d.w;
      for (int64_t kx = 0; kx < d.k; ++kx) {
        double wv = kk[ky * d.k + kx];
        auto [lo, hi] = ox_range(kx, 1, d.pad, d.w, d.ow);
        int64_t shift = kx - d.pad;
        for (int64_t ox = lo; ox <= hi; ++ox) {
          r0[ox] += wv * i0[ox + shift];
          r1[ox] += wv * i1[ox + shift];
          r2[ox] += wv * i2[ox + shift];
          r3[ox] += wv * i3[ox + shift];
        }
      }
    }
  }
}

PATHCAPS_NOINLINE void conv2d_fwd_plane(const double* __restrict in,
                                        const double* __restrict ker, double bias,
                                        double* __restrict out, const Conv2dDims& d) {
  // Interior rows (all ky valid) exist only for stride 1.
  int64_t int_lo = d.oh, int_hi = -1;
  if (d.stride == 1) {
    int_lo = d.pad;
    int_hi = std::min<int64_t>(d.oh - 1, d.h - d.k + d.pad);
  }
  if (int_hi < int_lo) {
    for (int64_t oy = 0; oy < d.oh; ++oy)
      conv2d_fwd_row(in, ker, bias, out + oy * d.ow, oy, d);
    return;
  }
  for (int64_t oy = 0; oy < int_lo; ++oy)
    conv2d_fwd_row(in, ker, bias, out + oy * d.ow, oy, d);
  int64_t oy = int_lo;
  for (; oy + 4 <= int_hi + 1; oy += 4) conv2d_fwd_row4(in, ker, bias, out, oy, d);
  for (; oy <= int_hi; ++oy) conv2d_fwd_row(in, ker, bias, out + oy * d.ow, oy, d);
  for (oy = int_hi + 1; oy < d.oh; ++oy)
    conv2d_fwd_row(in, ker, bias, out + oy * d.ow, oy, d);
}

// Valid input-x range for a kernel column in the gather form (stride 1):
// 0 <= ix - kx + pad <= ow-1 and 0 <= ix <= w-1.
inline std::pair<int64_t, int64_t> ix_range(int64_t kx, int64_t pad, int64_t w, int64_t ow) {
  int64_t lo = std::max<int64_t>(0, kx - pad);
  int64_t hi = std::min<int64_t>(w - 1, ow - 1 + kx - pad);
  return {lo, hi};
}

// Stride-1 input gradient, gathered per input row:
// gin[ci,iy,ix] += sum_{co,ky,kx} ker[co,ci,ky,kx] * gout[co, iy+pad-ky, ix+pad-kx]
PATHCAPS_NOINLINE void conv2d_bwd_input_row(const double* __restrict gout,
                                            const double* __restrict ker,
                                            double* __restrict girow, int64_t ci, int64_t iy,
                                            const Conv2dDims& d) {
  for (int64_t co = 0; co < d.c_out; ++co) {
    const double* goplane = gout + co * d.oh * d.ow;
    const double* kk = ker + (co * d.c_in + ci) * d.k * d.k;
    for (int64_t ky = 0; ky < d.k; ++ky) {
      int64_t oy = iy + d.pad - ky;
      if (oy < 0 || oy >= d.oh) continue;
      const double* gorow = goplane + oy * d.ow;
      for (int64_t kx = 0; kx < d.k; ++kx) {
        double wv = kk[ky * d.k + kx];
        auto [lo, hi] = ix_range(kx, d.pad, d.w, d.ow);
        const double* __restrict gr = gorow + d.pad - kx;
        for (int64_t ix = lo; ix <= hi; ++ix) girow[ix] += wv * gr[ix];
      }
    }
  }
}

PATHCAPS_NOINLINE void conv2d_bwd_input_row4(const double* __restrict gout,
                                             const double* __restrict ker,
                                             double* __restrict giplane, int64_t ci,
                                             int64_t iy0, const Conv2dDims& d) {
  double* __restrict g0 = giplane + (iy0 + 0) * d.w;
  double* __restrict g1 = giplane + (iy0 + 1) * d.w;
  double* __restrict g2 = giplane + (iy0 + 2) * d.w;
  double* __restrict g3 = giplane + (iy0 + 3) * d.w;
  for (int64_t co = 0; co < d.c_out; ++co) {
    const double* goplane = gout + co * d.oh * d.ow;
    const double* kk = ker + (co * d.c_in + ci) * d.k * d.k;
    for (int64_t ky = 0; ky < d.k; ++ky) {
      int64_t oy = iy0 + d.pad - ky;
      const double* __restrict o0 = goplane + (oy + 0) * d.ow + d.pad;
      const double* __restrict o1 = goplane + (oy + 1) * d.ow + d.pad;
      const double* __restrict o2 = goplane + (oy + 2) * d.ow + d.pad;
      const double* __restrict o3 = goplane + (oy + 3) * d.ow + d.pad;
      for (int64_t kx = 0; kx < d.k; ++kx) {
        double wv = kk[ky * d.k + kx];
        auto [lo, hi] = ix_range(kx, d.pad, d.w, d.ow);
        for (int64_t ix = lo; ix <= hi; ++ix) {
          g0[ix] += wv * o0[ix - kx];
          g1[ix] += wv * o1[ix - kx];
          g2[ix] += wv * o2[ix - kx];
          g3[ix] += wv * o3[ix - kx];
        }
      }
    }
  }
}

PATHCAPS_NOINLINE void conv2d_bwd_input_plane(const double* __restrict gout,
                                              const double* __restrict ker,
                                              double* __restrict gin, int64_t b, int64_t ci,
                                              const Conv2dDims& d) {
  double* giplane = gin + (b * d.c_in + ci) * d.h * d.w;
  const double* gob = gout + b * d.c_out * d.oh * d.ow;

  if (d.stride == 1) {
    // interior input rows: every ky maps into a valid output row
    int64_t int_lo = std::max<int64_t>(0, d.k - 1 - d.pad);
    int64_t int_hi = std::min<int64_t>(d.h - 1, d.oh - 1 - d.pad);
    if (int_hi < int_lo) {
      for (int64_t iy = 0; iy < d.h; ++iy)
        conv2d_bwd_input_row(gob, ker, giplane + iy * d.w, ci, iy, d);
      return;
    }
    for (int64_t iy = 0; iy < int_lo; ++iy)
      conv2d_bwd_input_row(gob, ker, giplane + iy * d.w, ci, iy, d);
    int64_t iy = int_lo;
    for (; iy + 4 <= int_hi + 1; iy += 4) conv2d_bwd_input_row4(gob, ker, giplane, ci, iy, d);
    for (; iy <= int_hi; ++iy)
      conv2d_bwd_input_row(gob, ker, giplane + iy * d.w, ci, iy, d);
    for (iy = int_hi + 1; iy < d.h; ++iy)
      conv2d_bwd_input_row(gob, ker, giplane + iy * d.w, ci, iy, d);
    return;
  }

  // generic strided scatter
  for (int64_t co = 0; co < d.c_out; ++co) {
    const double* goplane = gob + co * d.oh * d.ow;
    const double* kk = ker + (co * d.c_in + ci) * d.k * d.k;
    for (int64_t oy = 0; oy < d.oh; ++oy) {
      const double* gorow = goplane + oy * d.ow;
      for (int64_t ky = 0; ky < d.k; ++ky) {
        int64_t iy = oy * d.stride + ky - d.pad;
        if (iy < 0 || iy >= d.h) continue;
        double* girow = giplane + iy * d.w;
        for (int64_t kx = 0; kx < d.k; ++kx) {
          double wv = kk[ky * d.k + kx];
          auto [lo, hi] = ox_range(kx, d.stride, d.pad, d.w, d.ow);
          for (int64_t ox = lo; ox <= hi; ++ox)
            girow[ox * d.stride + kx - d.pad] += wv * gorow[ox];
        }
      }
    }
  }
}

PATHCAPS_NOINLINE void conv2d_bwd_kernel_slice(const double* __restrict gout,
                                               const double* __restrict in,
                                               double* __restrict gker, int64_t co,
                                               const Conv2dDims& d) {
  constexpr int kLanes = 8;
  for (int64_t b = 0; b < d.batch; ++b) {
    const double* goplane = gout + (b * d.c_out + co) * d.oh * d.ow;
    for (int64_t ci = 0; ci < d.c_in; ++ci) {
      const double* iplane = in + (b * d.c_in + ci) * d.h * d.w;
      double* gk = gker + (co * d.c_in + ci) * d.k * d.k;
      for (int64_t ky = 0; ky < d.k; ++ky) {
        for (int64_t kx = 0; kx < d.k; ++kx) {
          auto [lo, hi] = ox_range(kx, d.stride, d.pad, d.w, d.ow);
          // Lane-wise accumulation across all rows, one combine at the end.
          double lanes[kLanes] = {0, 0, 0, 0, 0, 0, 0, 0};
          double tail = 0.0;
          for (int64_t oy = 0; oy < d.oh; ++oy) {
            int64_t iy = oy * d.stride + ky - d.pad;
            if (iy < 0 || iy >= d.h) continue;
            const double* gorow = goplane + oy * d.ow;
            const double* irow = iplane + iy * d.w;
            if (d.stride == 1) {
              const double* ir = irow + kx - d.pad;
              int64_t ox = lo;
              for (; ox + kLanes <= hi + 1; ox += kLanes)
                for (int l = 0; l < kLanes; ++l) lanes[l] += gorow[ox + l] * ir[ox + l];
              for (; ox <= hi; ++ox) tail += gorow[ox] * ir[ox];
            } else {
              for (int64_t ox = lo; ox <= hi; ++ox)
                tail += gorow[ox] * irow[ox * d.stride + kx - d.pad];
            }
          }
          double acc = (((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                        ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))) +
                       tail;
          gk[ky * d.k + kx] += acc;
        }
      }
    }
  }
}

PATHCAPS_NOINLINE void conv2d_bwd_bias_slice(const double* __restrict gout,
                                             double* __restrict gbias, int64_t co,
                                             const Conv2dDims& d) {
  double acc = 0.0;
  for (int64_t b = 0; b < d.batch; ++b) {
    const double* gp = gout + (b * d.c_out + co) * d.oh * d.ow;
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (int64_t i = 0; i < d.oh * d.ow; ++i) s += gp[i];
    acc += s;
  }
  if (pathcaps::testing::corrupt_conv_bias_backward) acc += 0.05;
  gbias[co] += acc;
}

// -------------------------------------------------------------- maxpool --

PATHCAPS_NOINLINE void maxpool_fwd_plane(const double* __restrict in, double* __restrict out,
                                         int32_t* __restrict argmax, int64_t plane,
                                         const Pool2dDims& d) {
  const double* ip = in + plane * d.h * d.w;
  double* op = out + plane * d.oh * d.ow;
  int32_t* ap = argmax + plane * d.oh * d.ow;
  for (int64_t oy = 0; oy < d.oh; ++oy) {
    for (int64_t ox = 0; ox < d.ow; ++ox) {
      int64_t y0 = oy * d.stride, x0 = ox * d.stride;
      double best = ip[y0 * d.w + x0];
      int64_t best_at = y0 * d.w + x0;
      for (int64_t ky = 0; ky < d.k; ++ky) {
        for (int64_t kx = 0; kx < d.k; ++kx) {
          int64_t idx = (y0 + ky) * d.w + (x0 + kx);
          if (ip[idx] > best) {  // strict: ties keep the first in row-major order
            best = ip[idx];
            best_at = idx;
          }
        }
      }
      op[oy * d.ow + ox] = best;
      ap[oy * d.ow + ox] = static_cast<int32_t>(best_at);
    }
  }
}

PATHCAPS_NOINLINE void maxpool_bwd_plane(const double* __restrict gout,
                                         const int32_t* __restrict argmax,
                                         double* __restrict gin, int64_t plane,
                                         const Pool2dDims& d) {
  const double* gop = gout + plane * d.oh * d.ow;
  const int32_t* ap = argmax + plane * d.oh * d.ow;
  double* gip = gin + plane * d.h * d.w;
  for (int64_t i = 0; i < d.oh * d.ow; ++i) gip[ap[i]] += gop[i];
}

// ---------------------------------------------------------------- dense --

PATHCAPS_NOINLINE void dense_fwd_row(const double* __restrict in, const double* __restrict wt,
                                     const double* __restrict bias, double* __restrict out,
                                     int64_t b, int64_t n, int64_t m) {
  const double* x = in + b * n;
  double* y = out + b * m;
  for (int64_t j = 0; j < m; ++j) {
    const double* wr = wt + j * n;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (int64_t i = 0; i < n; ++i) acc += x[i] * wr[i];
    y[j] = acc + bias[j];
  }
}

PATHCAPS_NOINLINE void dense_bwd_input_row(const double* __restrict gout,
                                           const double* __restrict wt, double* __restrict gin,
                                           int64_t b, int64_t n, int64_t m) {
  const double* go = gout + b * m;
  double* gi = gin + b * n;
  for (int64_t j = 0; j < m; ++j) {
    double g = go[j];
    const double* wr = wt + j * n;
    for (int64_t i = 0; i < n; ++i) gi[i] += g * wr[i];
  }
}

PATHCAPS_NOINLINE void dense_bwd_weight_row(const double* __restrict gout,
                                            const double* __restrict in, double* __restrict gwt,
                                            int64_t j, int64_t batch, int64_t n, int64_t m) {
  double* gw = gwt + j * n;
  for (int64_t b = 0; b < batch; ++b) {
    double g = gout[b * m + j];
    const double* x = in + b * n;
    for (int64_t i = 0; i < n; ++i) gw[i] += g * x[i];
  }
}

PATHCAPS_NOINLINE void dense_bwd_bias_row(const double* __restrict gout,
                                          double* __restrict gbias, int64_t j, int64_t batch,
                                          int64_t m) {
  double acc = 0.0;
  for (int64_t b = 0; b < batch; ++b) acc += gout[b * m + j];
  gbias[j] += acc;
}

// -------------------------------------------------------------- capsules --

PATHCAPS_NOINLINE void predict_fwd_unit(const double* __restrict u, const double* __restrict w,
                                        double* __restrict uhat, int64_t b, int64_t i,
                                        int64_t n_in, int64_t n_out, int64_t d_out,
                                        int64_t d_in) {
  const double* uv = u + (b * n_in + i) * d_in;
  for (int64_t j = 0; j < n_out; ++j) {
    const double* wm = w + ((i * n_out + j) * d_out) * d_in;
    double* uh = uhat + ((b * n_in + i) * n_out + j) * d_out;
    for (int64_t od = 0; od < d_out; ++od) {
      const double* wr = wm + od * d_in;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (int64_t id = 0; id < d_in; ++id) acc += wr[id] * uv[id];
      uh[od] = acc;
    }
  }
}

PATHCAPS_NOINLINE void predict_bwd_u_unit(const double* __restrict guhat,
                                          const double* __restrict w, double* __restrict gu,
                                          int64_t b, int64_t i, int64_t n_in, int64_t n_out,
                                          int64_t d_out, int64_t d_in) {
  double* gv = gu + (b * n_in + i) * d_in;
  for (int64_t j = 0; j < n_out; ++j) {
    const double* wm = w + ((i * n_out + j) * d_out) * d_in;
    const double* gh = guhat + ((b * n_in + i) * n_out + j) * d_out;
    for (int64_t od = 0; od < d_out; ++od) {
      double g = gh[od];
      const double* wr = wm + od * d_in;
      for (int64_t id = 0; id < d_in; ++id) gv[id] += g * wr[id];
    }
  }
}

PATHCAPS_NOINLINE void predict_bwd_w_unit(const double* __restrict guhat,
                                          const double* __restrict u, double* __restrict gw,
                                          int64_t i, int64_t batch, int64_t n_in, int64_t n_out,
                                          int64_t d_out, int64_t d_in) {
  for (int64_t b = 0; b < batch; ++b) {
    const double* uv = u + (b * n_in + i) * d_in;
    for (int64_t j = 0; j < n_out; ++j) {
      const double* gh = guhat + ((b * n_in + i) * n_out + j) * d_out;
      double* gwm = gw + ((i * n_out + j) * d_out) * d_in;
      for (int64_t od = 0; od < d_out; ++od) {
        double g = gh[od];
        double* gwr = gwm + od * d_in;
        for (int64_t id = 0; id < d_in; ++id) gwr[id] += g * uv[id];
      }
    }
  }
}

PATHCAPS_NOINLINE void vote_sum_fwd_slice(const double* __restrict c,
                                          const double* __restrict uhat, double* __restrict s,
                                          int64_t b, int64_t j, int64_t n_in, int64_t n_out,
                                          int64_t d) {
  double* sv = s + (b * n_out + j) * d;
  for (int64_t x = 0; x < d; ++x) sv[x] = 0.0;
  for (int64_t i = 0; i < n_in; ++i) {
    double cv = c[(b * n_in + i) * n_out + j];
    const double* uh = uhat + ((b * n_in + i) * n_out + j) * d;
    for (int64_t x = 0; x < d; ++x) sv[x] += cv * uh[x];
  }
}

PATHCAPS_NOINLINE void vote_sum_bwd_c_unit(const double* __restrict gs,
                                           const double* __restrict uhat, double* __restrict gc,
                                           int64_t b, int64_t i, int64_t n_in, int64_t n_out,
                                           int64_t d) {
  for (int64_t j = 0; j < n_out; ++j) {
    const double* gsv = gs + (b * n_out + j) * d;
    const double* uh = uhat + ((b * n_in + i) * n_out + j) * d;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (int64_t x = 0; x < d; ++x) acc += gsv[x] * uh[x];
    gc[(b * n_in + i) * n_out + j] += acc;
  }
}

PATHCAPS_NOINLINE void vote_sum_bwd_uhat_unit(const double* __restrict gs,
                                              const double* __restrict c,
                                              double* __restrict guhat, int64_t b, int64_t i,
                                              int64_t n_in, int64_t n_out, int64_t d) {
  for (int64_t j = 0; j < n_out; ++j) {
    double cv = c[(b * n_in + i) * n_out + j];
    const double* gsv = gs + (b * n_out + j) * d;
    double* gh = guhat + ((b * n_in + i) * n_out + j) * d;
    for (int64_t x = 0; x < d; ++x) gh[x] += cv * gsv[x];
  }
}

PATHCAPS_NOINLINE void agreement_fwd_unit(const double* __restrict uhat,
                                          const double* __restrict v, double* __restrict dot,
                                          int64_t b, int64_t i, int64_t n_in, int64_t n_out,
                                          int64_t d) {
  for (int64_t j = 0; j < n_out; ++j) {
    const double* uh = uhat + ((b * n_in + i) * n_out + j) * d;
    const double* vv = v + (b * n_out + j) * d;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (int64_t x = 0; x < d; ++x) acc += uh[x] * vv[x];
    dot[(b * n_in + i) * n_out + j] = acc;
  }
}

PATHCAPS_NOINLINE void agreement_bwd_uhat_unit(const double* __restrict gdot,
                                               const double* __restrict v,
                                               double* __restrict guhat, int64_t b, int64_t i,
                                               int64_t n_in, int64_t n_out, int64_t d) {
  for (int64_t j = 0; j < n_out; ++j) {
    double g = gdot[(b * n_in + i) * n_out + j];
    const double* vv = v + (b * n_out + j) * d;
    double* gh = guhat + ((b * n_in + i) * n_out + j) * d;
    for (int64_t x = 0; x < d; ++x) gh[x] += g * vv[x];
  }
}

PATHCAPS_NOINLINE void agreement_bwd_v_slice(const double* __restrict gdot,
                                             const double* __restrict uhat,
                                             double* __restrict gv, int64_t b, int64_t j,
                                             int64_t n_in, int64_t n_out, int64_t d) {
  double* gvv = gv + (b * n_out + j) * d;
  for (int64_t i = 0; i < n_in; ++i) {
    double g = gdot[(b * n_in + i) * n_out + j];
    const double* uh = uhat + ((b * n_in + i) * n_out + j) * d;
    for (int64_t x = 0; x < d; ++x) gvv[x] += g * uh[x];
  }
}

}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void conv2d_forward(const double* in, const double* ker, const double* bias, double* out,
                    const Conv2dDims& d) {
  drive(d.batch * d.c_out, [&](int64_t p) {
    int64_t b = p / d.c_out, co = p % d.c_out;
    conv2d_fwd_plane(in + b * d.c_in * d.h * d.w, ker + co * d.c_in * d.k * d.k, bias[co],
                     out + p * d.oh * d.ow, d);
  });
}

void conv2d_backward_input(const double* gout, const double* ker, double* gin,
                           const Conv2dDims& d) {
  drive(d.batch * d.c_in, [&](int64_t p) {
    conv2d_bwd_input_plane(gout, ker, gin, p / d.c_in, p % d.c_in, d);
  });
}

void conv2d_backward_kernel(const double* gout, const double* in, double* gker,
                            const Conv2dDims& d) {
  drive(d.c_out, [&](int64_t co) { conv2d_bwd_kernel_slice(gout, in, gker, co, d); });
}

void conv2d_backward_bias(const double* gout, double* gbias, const Conv2dDims& d) {
  drive(d.c_out, [&](int64_t co) { conv2d_bwd_bias_slice(gout, gbias, co, d); });
}

void maxpool2d_forward(const double* in, double* out, int32_t* argmax, const Pool2dDims& d) {
  drive(d.batch * d.c, [&](int64_t p) { maxpool_fwd_plane(in, out, argmax, p, d); });
}

void maxpool2d_backward(const double* gout, const int32_t* argmax, double* gin,
                        const Pool2dDims& d) {
  drive(d.batch * d.c, [&](int64_t p) { maxpool_bwd_plane(gout, argmax, gin, p, d); });
}

void dense_forward(const double* in, const double* wt, const double* bias, double* out,
                   int64_t batch, int64_t n, int64_t m) {
  drive(batch, [&](int64_t b) { dense_fwd_row(in, wt, bias, out, b, n, m); });
}

void dense_backward_input(const double* gout, const double* wt, double* gin, int64_t batch,
                          int64_t n, int64_t m) {
  drive(batch, [&](int64_t b) { dense_bwd_input_row(gout, wt, gin, b, n, m); });
}

void dense_backward_weight(const double* gout, const double* in, double* gwt, int64_t batch,
                           int64_t n, int64_t m) {
  drive(m, [&](int64_t j) { dense_bwd_weight_row(gout, in, gwt, j, batch, n, m); });
}

void dense_backward_bias(const double* gout, double* gbias, int64_t batch, int64_t m) {
  drive(m, [&](int64_t j) { dense_bwd_bias_row(gout, gbias, j, batch, m); });
}

void predict_forward(const double* u, const double* w, double* uhat, int64_t batch,
                     int64_t n_in, int64_t n_out, int64_t d_out, int64_t d_in) {
  drive(batch * n_in, [&](int64_t p) {
    predict_fwd_unit(u, w, uhat, p / n_in, p % n_in, n_in, n_out, d_out, d_in);
  });
}

void predict_backward_u(const double* guhat, const double* w, double* gu, int64_t batch,
                        int64_t n_in, int64_t n_out, int64_t d_out, int64_t d_in) {
  drive(batch * n_in, [&](int64_t p) {
    predict_bwd_u_unit(guhat, w, gu, p / n_in, p % n_in, n_in, n_out, d_out, d_in);
  });
}

void predict_backward_w(const double* guhat, const double* u, double* gw, int64_t batch,
                        int64_t n_in, int64_t n_out, int64_t d_out, int64_t d_in) {
  drive(n_in, [&](int64_t i) {
    predict_bwd_w_unit(guhat, u, gw, i, batch, n_in, n_out, d_out, d_in);
  });
}

void vote_sum_forward(const double* c, const double* uhat, double* s, int64_t batch,
                      int64_t n_in, int64_t n_out, int64_t d) {
  drive(batch * n_out, [&](int64_t p) {
    vote_sum_fwd_slice(c, uhat, s, p / n_out, p % n_out, n_in, n_out, d);
  });
}

void vote_sum_backward_c(const double* gs, const double* uhat, double* gc, int64_t batch,
                         int64_t n_in, int64_t n_out, int64_t d) {
  drive(batch * n_in, [&](int64_t p) {
    vote_sum_bwd_c_unit(gs, uhat, gc, p / n_in, p % n_in, n_in, n_out, d);
  });
}

void vote_sum_backward_uhat(const double* gs, const double* c, double* guhat, int64_t batch,
                            int64_t n_in, int64_t n_out, int64_t d) {
  drive(batch * n_in, [&](int64_t p) {
    vote_sum_bwd_uhat_unit(gs, c, guhat, p / n_in, p % n_in, n_in, n_out, d);
  });
}

void agreement_forward(const double* uhat, const double* v, double* dot, int64_t batch,
                       int64_t n_in, int64_t n_out, int64_t d) {
  drive(batch * n_in, [&](int64_t p) {
    agreement_fwd_unit(uhat, v, dot, p / n_in, p % n_in, n_in, n_out, d);
  });
}

void agreement_backward_uhat(const double* gdot, const double* v, double* guhat, int64_t batch,
                             int64_t n_in, int64_t n_out, int64_t d) {
  drive(batch * n_in, [&](int64_t p) {
    agreement_bwd_uhat_unit(gdot, v, guhat, p / n_in, p % n_in, n_in, n_out, d);
  });
}

void agreement_backward_v(const double* gdot, const double* uhat, double* gv, int64_t batch,
                          int64_t n_in, int64_t n_out, int64_t d) {
  drive(batch * n_out, [&](int64_t p) {
    agreement_bwd_v_slice(gdot, uhat, gv, p / n_out, p % n_out, n_in, n_out, d);
  });
}

}  // namespace pathcaps::kernels
