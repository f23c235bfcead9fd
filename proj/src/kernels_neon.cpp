// NEON variants, mirroring the AVX2 file at 4-lane width (dense_forward
// keeps the 8-lane semantics with a register pair). Clamps use
// compare+select so tie/zero selection matches std::min/max exactly.

#include "kernels_internal.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>

namespace darforge::kernels::detail {
namespace {

// (b < a) ? b : a
inline float32x4_t vmin_std(float32x4_t a, float32x4_t b) {
    return vbslq_f32(vcltq_f32(b, a), b, a);
}
// (a < b) ? b : a
inline float32x4_t vmax_std(float32x4_t a, float32x4_t b) {
    return vbslq_f32(vcltq_f32(a, b), b, a);
}

void conv2d_forward_neon(const float* in, int C, int H, int W,
                         const float* w, int OC, int K, int stride, int pad,
                         const float* bias,
                         float* out, int OH, int OW) {
    if (stride != 1) {
        scalar_table().conv2d_forward(in, C, H, W, w, OC, K, stride, pad, bias, out, OH, OW);
        return;
    }
    for (int oc = 0; oc < OC; ++oc) {
        for (int oy = 0; oy < OH; ++oy) {
            float* orow = out + (static_cast<size_t>(oc) * OH + oy) * OW;
            const float bv = bias ? bias[oc] : 0.0f;
            for (int ox = 0; ox < OW; ++ox) orow[ox] = bv;
            for (int ic = 0; ic < C; ++ic) {
                for (int ky = 0; ky < K; ++ky) {
                    const int iy = oy + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    const float* irow = in + (static_cast<size_t>(ic) * H + iy) * W;
                    for (int kx = 0; kx < K; ++kx) {
                        const float wv = w[((static_cast<size_t>(oc) * C + ic) * K + ky) * K + kx];
                        const float32x4_t wvec = vdupq_n_f32(wv);
                        const int lo = std::max(0, pad - kx);
                        const int hi = std::min(OW, W + pad - kx);
                        const float* src = irow + kx - pad;
                        int ox = lo;
                        for (; ox + 4 <= hi; ox += 4) {
                            float32x4_t acc = vld1q_f32(orow + ox);
                            acc = vaddq_f32(acc, vmulq_f32(wvec, vld1q_f32(src + ox)));
                            vst1q_f32(orow + ox, acc);
                        }
                        for (; ox < hi; ++ox) orow[ox] += wv * src[ox];
                    }
                }
            }
        }
    }
}

void conv2d_backward_data_neon(const float* w, int OC, int C, int K, int stride, int pad,
                               const float* gout, int OH, int OW,
                               float* gin, int H, int W) {
    if (stride != 1) {
        scalar_table().conv2d_backward_data(w, OC, C, K, stride, pad, gout, OH, OW, gin, H, W);
        return;
    }
    std::fill(gin, gin + static_cast<size_t>(C) * H * W, 0.0f);
    for (int oc = 0; oc < OC; ++oc) {
        for (int oy = 0; oy < OH; ++oy) {
            const float* grow = gout + (static_cast<size_t>(oc) * OH + oy) * OW;
            for (int ic = 0; ic < C; ++ic) {
                for (int ky = 0; ky < K; ++ky) {
                    const int iy = oy + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    float* girow = gin + (static_cast<size_t>(ic) * H + iy) * W;
                    for (int kx = 0; kx < K; ++kx) {
                        const float wv = w[((static_cast<size_t>(oc) * C + ic) * K + ky) * K + kx];
                        const float32x4_t wvec = vdupq_n_f32(wv);
                        const int lo = std::max(0, pad - kx);
                        const int hi = std::min(OW, W + pad - kx);
                        float* dst = girow + kx - pad;
                        int ox = lo;
                        for (; ox + 4 <= hi; ox += 4) {
                            float32x4_t acc = vld1q_f32(dst + ox);
                            acc = vaddq_f32(acc, vmulq_f32(wvec, vld1q_f32(grow + ox)));
                            vst1q_f32(dst + ox, acc);
                        }
                        for (; ox < hi; ++ox) dst[ox] += wv * grow[ox];
                    }
                }
            }
        }
    }
}

void dense_forward_neon(const float* w, int out_dim, int in_dim,
                        const float* b, const float* x, float* y) {
    for (int o = 0; o < out_dim; ++o) {
        const float* wrow = w + static_cast<size_t>(o) * in_dim;
        float32x4_t acc0 = vdupq_n_f32(0.0f); // lanes 0..3
        float32x4_t acc1 = vdupq_n_f32(0.0f); // lanes 4..7
        int i = 0;
        for (; i + 8 <= in_dim; i += 8) {
            acc0 = vaddq_f32(acc0, vmulq_f32(vld1q_f32(wrow + i), vld1q_f32(x + i)));
            acc1 = vaddq_f32(acc1, vmulq_f32(vld1q_f32(wrow + i + 4), vld1q_f32(x + i + 4)));
        }
        float lanes[8];
        vst1q_f32(lanes, acc0);
        vst1q_f32(lanes + 4, acc1);
        for (int l = 0; i < in_dim; ++i, ++l) lanes[l] += wrow[i] * x[i];
        const float t0 = lanes[0] + lanes[4];
        const float t1 = lanes[1] + lanes[5];
        const float t2 = lanes[2] + lanes[6];
        const float t3 = lanes[3] + lanes[7];
        y[o] = (b ? b[o] : 0.0f) + ((t0 + t2) + (t1 + t3));
    }
}

void dense_backward_data_neon(const float* w, int out_dim, int in_dim,
                              const float* gy, float* gx) {
    std::fill(gx, gx + in_dim, 0.0f);
    for (int o = 0; o < out_dim; ++o) {
        const float g = gy[o];
        const float32x4_t gv = vdupq_n_f32(g);
        const float* wrow = w + static_cast<size_t>(o) * in_dim;
        int i = 0;
        for (; i + 4 <= in_dim; i += 4) {
            float32x4_t acc = vld1q_f32(gx + i);
            acc = vaddq_f32(acc, vmulq_f32(vld1q_f32(wrow + i), gv));
            vst1q_f32(gx + i, acc);
        }
        for (; i < in_dim; ++i) gx[i] += wrow[i] * g;
    }
}

void dense_backward_weights_neon(const float* x, int in_dim,
                                 const float* gy, int out_dim,
                                 float* gw, float* gb) {
    for (int o = 0; o < out_dim; ++o) {
        const float g = gy[o];
        const float32x4_t gv = vdupq_n_f32(g);
        float* gwrow = gw + static_cast<size_t>(o) * in_dim;
        int i = 0;
        for (; i + 4 <= in_dim; i += 4) {
            float32x4_t acc = vld1q_f32(gwrow + i);
            acc = vaddq_f32(acc, vmulq_f32(gv, vld1q_f32(x + i)));
            vst1q_f32(gwrow + i, acc);
        }
        for (; i < in_dim; ++i) gwrow[i] += g * x[i];
        gb[o] += g;
    }
}

void relu_forward_neon(const float* x, float* y, size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vld1q_f32(x + i);
        vst1q_f32(y + i, vbslq_f32(vcgtq_f32(v, zero), v, zero));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_neon(const float* x, const float* gy, float* gx, size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const uint32x4_t mask = vcgtq_f32(vld1q_f32(x + i), zero);
        vst1q_f32(gx + i, vbslq_f32(mask, vld1q_f32(gy + i), zero));
    }
    for (; i < n; ++i) gx[i] = x[i] > 0.0f ? gy[i] : 0.0f;
}

void pgd_step_neon(float* x, const float* g, const float* mask,
                   const float* center, float alpha, float eps,
                   float px_lo, float px_hi, size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    const float32x4_t one = vdupq_n_f32(1.0f);
    const float32x4_t av = vdupq_n_f32(alpha);
    const float32x4_t ev = vdupq_n_f32(eps);
    const float32x4_t lov = vdupq_n_f32(px_lo);
    const float32x4_t hiv = vdupq_n_f32(px_hi);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t gv = vld1q_f32(g + i);
        const float32x4_t pos = vbslq_f32(vcgtq_f32(gv, zero), one, zero);
        const float32x4_t neg = vbslq_f32(vcltq_f32(gv, zero), one, zero);
        float32x4_t step = vmulq_f32(av, vsubq_f32(pos, neg));
        if (mask) step = vmulq_f32(step, vld1q_f32(mask + i));
        float32x4_t t = vaddq_f32(vld1q_f32(x + i), step);
        t = vmin_std(vmax_std(t, lov), hiv);
        const float32x4_t c = vld1q_f32(center + i);
        t = vmin_std(vmax_std(t, vsubq_f32(c, ev)), vaddq_f32(c, ev));
        vst1q_f32(x + i, t);
    }
    for (; i < n; ++i) {
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

const KernelTable& neon_table() {
    static const KernelTable table = {
        conv2d_forward_neon,
        conv2d_backward_data_neon,
        scalar_table().conv2d_backward_weights,
        dense_forward_neon,
        dense_backward_data_neon,
        dense_backward_weights_neon,
        relu_forward_neon,
        relu_backward_neon,
        pgd_step_neon,
    };
    return table;
}

} // namespace darforge::kernels::detail

#endif // aarch64
