// Reference kernels. These define the arithmetic every SIMD backend must
// reproduce bit-for-bit: per-output serial accumulation for convolutions,
// the fixed loop nests documented in kernels.hpp for the backward passes,
// and the 8-lane blocked accumulation for dense_forward.

#include "kernels_internal.hpp"

#include <algorithm>

namespace darforge::kernels::detail {
namespace {

void conv2d_forward_scalar(const float* in, int C, int H, int W,
                           const float* w, int OC, int K, int stride, int pad,
                           const float* bias,
                           float* out, int OH, int OW) {
    for (int oc = 0; oc < OC; ++oc) {
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                float acc = bias ? bias[oc] : 0.0f;
                for (int ic = 0; ic < C; ++ic) {
                    for (int ky = 0; ky < K; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < K; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= W) continue;
                            acc += w[((static_cast<size_t>(oc) * C + ic) * K + ky) * K + kx] *
                                   in[(static_cast<size_t>(ic) * H + iy) * W + ix];
                        }
                    }
                }
                out[(static_cast<size_t>(oc) * OH + oy) * OW + ox] = acc;
            }
        }
    }
}

void conv2d_backward_data_scalar(const float* w, int OC, int C, int K, int stride, int pad,
                                 const float* gout, int OH, int OW,
                                 float* gin, int H, int W) {
    std::fill(gin, gin + static_cast<size_t>(C) * H * W, 0.0f);
    for (int oc = 0; oc < OC; ++oc) {
        for (int oy = 0; oy < OH; ++oy) {
            const float* grow = gout + (static_cast<size_t>(oc) * OH + oy) * OW;
            for (int ic = 0; ic < C; ++ic) {
                for (int ky = 0; ky < K; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    float* girow = gin + (static_cast<size_t>(ic) * H + iy) * W;
                    for (int kx = 0; kx < K; ++kx) {
                        const float wv = w[((static_cast<size_t>(oc) * C + ic) * K + ky) * K + kx];
                        for (int ox = 0; ox < OW; ++ox) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= W) continue;
                            girow[ix] += wv * grow[ox];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_weights_scalar(const float* in, int C, int H, int W,
                                    const float* gout, int OC, int OH, int OW,
                                    int K, int stride, int pad,
                                    float* gw, float* gb) {
    for (int oc = 0; oc < OC; ++oc) {
        const float* gplane = gout + static_cast<size_t>(oc) * OH * OW;
        for (int ic = 0; ic < C; ++ic) {
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx) {
                    const size_t widx = ((static_cast<size_t>(oc) * C + ic) * K + ky) * K + kx;
                    float acc = gw[widx];
                    for (int oy = 0; oy < OH; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= H) continue;
                        const float* irow = in + (static_cast<size_t>(ic) * H + iy) * W;
                        const float* grow = gplane + static_cast<size_t>(oy) * OW;
                        for (int ox = 0; ox < OW; ++ox) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= W) continue;
                            acc += grow[ox] * irow[ix];
                        }
                    }
                    gw[widx] = acc;
                }
            }
        }
        float bacc = gb[oc];
        for (size_t i = 0; i < static_cast<size_t>(OH) * OW; ++i) bacc += gplane[i];
        gb[oc] = bacc;
    }
}

void dense_forward_scalar(const float* w, int out_dim, int in_dim,
                          const float* b, const float* x, float* y) {
    for (int o = 0; o < out_dim; ++o) {
        const float* wrow = w + static_cast<size_t>(o) * in_dim;
        float lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        int i = 0;
        for (; i + 8 <= in_dim; i += 8)
            for (int l = 0; l < 8; ++l) lanes[l] += wrow[i + l] * x[i + l];
        for (int l = 0; i < in_dim; ++i, ++l) lanes[l] += wrow[i] * x[i];
        const float t0 = lanes[0] + lanes[4];
        const float t1 = lanes[1] + lanes[5];
        const float t2 = lanes[2] + lanes[6];
        const float t3 = lanes[3] + lanes[7];
        y[o] = (b ? b[o] : 0.0f) + ((t0 + t2) + (t1 + t3));
    }
}

void dense_backward_data_scalar(const float* w, int out_dim, int in_dim,
                                const float* gy, float* gx) {
    std::fill(gx, gx + in_dim, 0.0f);
    for (int o = 0; o < out_dim; ++o) {
        const float g = gy[o];
        const float* wrow = w + static_cast<size_t>(o) * in_dim;
        for (int i = 0; i < in_dim; ++i) gx[i] += wrow[i] * g;
    }
}

void dense_backward_weights_scalar(const float* x, int in_dim,
                                   const float* gy, int out_dim,
                                   float* gw, float* gb) {
    for (int o = 0; o < out_dim; ++o) {
        const float g = gy[o];
        float* gwrow = gw + static_cast<size_t>(o) * in_dim;
        for (int i = 0; i < in_dim; ++i) gwrow[i] += g * x[i];
        gb[o] += g;
    }
}

void relu_forward_scalar(const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_scalar(const float* x, const float* gy, float* gx, size_t n) {
    for (size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0f ? gy[i] : 0.0f;
}

void pgd_step_scalar(float* x, const float* g, const float* mask,
                     const float* center, float alpha, float eps,
                     float px_lo, float px_hi, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        const float gi = g[i];
        const float s = gi > 0.0f ? 1.0f : (gi < 0.0f ? -1.0f : 0.0f);
        float step = alpha * s;
        if (mask) step *= mask[i];
        float t = x[i] + step;
        t = std::min(std::max(t, px_lo), px_hi);
        x[i] = std::min(std::max(t, center[i] - eps), center[i] + eps);
    }
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        conv2d_forward_scalar,
        conv2d_backward_data_scalar,
        conv2d_backward_weights_scalar,
        dense_forward_scalar,
        dense_backward_data_scalar,
        dense_backward_weights_scalar,
        relu_forward_scalar,
        relu_backward_scalar,
        pgd_step_scalar,
    };
    return table;
}

} // namespace darforge::kernels::detail
