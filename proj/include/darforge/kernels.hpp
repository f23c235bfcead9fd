#pragma once

#include <cstddef>
#include <string>

// Hot inner loops of the toolkit. Every kernel has a scalar reference
// implementation plus SIMD variants (AVX2 on x86-64, NEON on aarch64)
// selected once at runtime from CPU capabilities. All variants of a kernel
// are bit-exact equals of the reference: conv and elementwise kernels
// vectorize across independent outputs with the reference accumulation
// order, and dense_forward is defined with an 8-lane blocked accumulation
// (fixed reduction tree, tail in lanes 0..r-1) that every backend
// implements verbatim. Equivalence is enforced with == in the test suite.
//
// Kernels that only run during training (conv weight gradients, pooling)
// stay scalar; attacks never touch them.

namespace darforge::kernels {

enum class Backend { scalar, avx2, neon };

const char* backend_name(Backend b);
bool backend_supported(Backend b);
Backend active_backend();
// Throws std::invalid_argument if the CPU lacks the backend. Intended for
// tests and benchmarking; the default is the best supported backend.
void set_backend(Backend b);

// -- convolution, zero padding, row-major (C,H,W) ---------------------------

// out[oc,oy,ox] = bias[oc] + sum_{ic,ky,kx} w[oc,ic,ky,kx] * in[ic, oy*stride+ky-pad, ox*stride+kx-pad]
// (out-of-bounds input taps contribute nothing). bias may be null.
void conv2d_forward(const float* in, int C, int H, int W,
                    const float* w, int OC, int K, int stride, int pad,
                    const float* bias,
                    float* out, int OH, int OW);

// gin[ic,iy,ix] = sum w[oc,ic,ky,kx] * gout[oc,oy,ox]; gin is overwritten.
// Accumulation order per input cell: oc, oy, (ic,ky,kx), ox.
void conv2d_backward_data(const float* w, int OC, int C, int K, int stride, int pad,
                          const float* gout, int OH, int OW,
                          float* gin, int H, int W);

// gw[oc,ic,ky,kx] += sum_{oy,ox} gout[oc,oy,ox] * in[...]; gb[oc] += sum gout.
// Training-only; scalar in every backend. gw/gb are accumulated into.
void conv2d_backward_weights(const float* in, int C, int H, int W,
                             const float* gout, int OC, int OH, int OW,
                             int K, int stride, int pad,
                             float* gw, float* gb);

// -- dense -------------------------------------------------------------------

// y[o] = b[o] + W[o,:] . x, with the 8-lane blocked accumulation described
// above. b may be null.
void dense_forward(const float* w, int out_dim, int in_dim,
                   const float* b, const float* x, float* y);

// gx[i] = sum_o w[o,i] * gy[o]; gx is overwritten.
// Accumulation order per input: o ascending.
void dense_backward_data(const float* w, int out_dim, int in_dim,
                         const float* gy, float* gx);

// gw[o,i] += gy[o] * x[i]; gb[o] += gy[o]. Accumulated into.
void dense_backward_weights(const float* x, int in_dim,
                            const float* gy, int out_dim,
                            float* gw, float* gb);

// -- elementwise ---------------------------------------------------------------

// y[i] = x[i] > 0 ? x[i] : 0
void relu_forward(const float* x, float* y, size_t n);

// gx[i] = x[i] > 0 ? gy[i] : 0
void relu_backward(const float* x, const float* gy, float* gx, size_t n);

// One PGD update on a flat slice:
//   step  = alpha * sign(g[i]), sign(0) = 0
//   if mask: step *= mask[i]
//   t     = clamp(x[i] + step, px_lo, px_hi)
//   x[i]  = clamp(t, center[i] - eps, center[i] + eps)
// mask may be null (full-image attacks).
void pgd_step(float* x, const float* g, const float* mask,
              const float* center, float alpha, float eps,
              float px_lo, float px_hi, size_t n);

} // namespace darforge::kernels
