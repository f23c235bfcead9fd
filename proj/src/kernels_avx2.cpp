// AVX2 variants. Bit-exact with the scalar reference: convolutions keep the
// reference per-output accumulation order (lanes are independent outputs),
// dense_forward implements the same 8-lane blocked semantics, and clamps are
// expressed as compare+blend so tie/zero selection matches std::min/max.
// Strided convolutions fall back to the reference.

#include "kernels_internal.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <algorithm>

namespace darforge::kernels::detail {
namespace {

// (b < a) ? b : a, the std::min selection rule.
inline __m256 vmin(__m256 a, __m256 b) {
    return _mm256_blendv_ps(a, b, _mm256_cmp_ps(b, a, _CMP_LT_OQ));
}
// (a < b) ? b : a, the std::max selection rule.
inline __m256 vmax(__m256 a, __m256 b) {
    return _mm256_blendv_ps(a, b, _mm256_cmp_ps(a, b, _CMP_LT_OQ));
}

void conv2d_forward_avx2(const float* in, int C, int H, int W,
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
            {
                const __m256 bvec = _mm256_set1_ps(bv);
                int ox = 0;
                for (; ox + 8 <= OW; ox += 8) _mm256_storeu_ps(orow + ox, bvec);
                for (; ox < OW; ++ox) orow[ox] = bv;
            }
            for (int ic = 0; ic < C; ++ic) {
                for (int ky = 0; ky < K; ++ky) {
                    const int iy = oy + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    const float* irow = in + (static_cast<size_t>(ic) * H + iy) * W;
                    for (int kx = 0; kx < K; ++kx) {
                        const float wv = w[((static_cast<size_t>(oc) * C + ic) * K + ky) * K + kx];
                        const __m256 wvec = _mm256_set1_ps(wv);
                        const int lo = std::max(0, pad - kx);
                        const int hi = std::min(OW, W + pad - kx);
                        const float* src = irow + kx - pad;
                        int ox = lo;
                        for (; ox + 8 <= hi; ox += 8) {
                            __m256 acc = _mm256_loadu_ps(orow + ox);
                            acc = _mm256_add_ps(acc, _mm256_mul_ps(wvec, _mm256_loadu_ps(src + ox)));
                            _mm256_storeu_ps(orow + ox, acc);
                        }
                        for (; ox < hi; ++ox) orow[ox] += wv * src[ox];
                    }
                }
            }
        }
    }
}

void conv2d_backward_data_avx2(const float* w, int OC, int C, int K, int stride, int pad,
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
                        const __m256 wvec = _mm256_set1_ps(wv);
                        const int lo = std::max(0, pad - kx);
                        const int hi = std::min(OW, W + pad - kx);
                        float* dst = girow + kx - pad;
                        int ox = lo;
                        for (; ox + 8 <= hi; ox += 8) {
                            __m256 acc = _mm256_loadu_ps(dst + ox);
                            acc = _mm256_add_ps(acc, _mm256_mul_ps(wvec, _mm256_loadu_ps(grow + ox)));
                            _mm256_storeu_ps(dst + ox, acc);
                        }
                        for (; ox < hi; ++ox) dst[ox] += wv * grow[ox];
                    }
                }
            }
        }
    }
}

void dense_forward_avx2(const float* w, int out_dim, int in_dim,
                        const float* b, const float* x, float* y) {
    for (int o = 0; o < out_dim; ++o) {
        const float* wrow = w + static_cast<size_t>(o) * in_dim;
        __m256 acc = _mm256_setzero_ps();
        int i = 0;
        for (; i + 8 <= in_dim; i += 8)
            acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(wrow + i), _mm256_loadu_ps(x + i)));
        float lanes[8];
        _mm256_storeu_ps(lanes, acc);
        for (int l = 0; i < in_dim; ++i, ++l) lanes[l] += wrow[i] * x[i];
        const float t0 = lanes[0] + lanes[4];
        const float t1 = lanes[1] + lanes[5];
        const float t2 = lanes[2] + lanes[6];
        const float t3 = lanes[3] + lanes[7];
        y[o] = (b ? b[o] : 0.0f) + ((t0 + t2) + (t1 + t3));
    }
}

void dense_backward_data_avx2(const float* w, int out_dim, int in_dim,
                              const float* gy, float* gx) {
    std::fill(gx, gx + in_dim, 0.0f);
    for (int o = 0; o < out_dim; ++o) {
        const float g = gy[o];
        const __m256 gv = _mm256_set1_ps(g);
        const float* wrow = w + static_cast<size_t>(o) * in_dim;
        int i = 0;
        for (; i + 8 <= in_dim; i += 8) {
            __m256 acc = _mm256_loadu_ps(gx + i);
            acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(wrow + i), gv));
            _mm256_storeu_ps(gx + i, acc);
        }
        for (; i < in_dim; ++i) gx[i] += wrow[i] * g;
    }
}

void dense_backward_weights_avx2(const float* x, int in_dim,
                                 const float* gy, int out_dim,
                                 float* gw, float* gb) {
    for (int o = 0; o < out_dim; ++o) {
        const float g = gy[o];
        const __m256 gv = _mm256_set1_ps(g);
        float* gwrow = gw + static_cast<size_t>(o) * in_dim;
        int i = 0;
        for (; i + 8 <= in_dim; i += 8) {
            __m256 acc = _mm256_loadu_ps(gwrow + i);
            acc = _mm256_add_ps(acc, _mm256_mul_ps(gv, _mm256_loadu_ps(x + i)));
            _mm256_storeu_ps(gwrow + i, acc);
        }
        for (; i < in_dim; ++i) gwrow[i] += g * x[i];
        gb[o] += g;
    }
}

void relu_forward_avx2(const float* x, float* y, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        _mm256_storeu_ps(y + i, _mm256_and_ps(v, _mm256_cmp_ps(v, zero, _CMP_GT_OQ)));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(const float* x, const float* gy, float* gx, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(gx + i, _mm256_and_ps(_mm256_loadu_ps(gy + i), mask));
    }
    for (; i < n; ++i) gx[i] = x[i] > 0.0f ? gy[i] : 0.0f;
}

void pgd_step_avx2(float* x, const float* g, const float* mask,
                   const float* center, float alpha, float eps,
                   float px_lo, float px_hi, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 av = _mm256_set1_ps(alpha);
    const __m256 ev = _mm256_set1_ps(eps);
    const __m256 lov = _mm256_set1_ps(px_lo);
    const __m256 hiv = _mm256_set1_ps(px_hi);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gv = _mm256_loadu_ps(g + i);
        const __m256 pos = _mm256_and_ps(one, _mm256_cmp_ps(gv, zero, _CMP_GT_OQ));
        const __m256 neg = _mm256_and_ps(one, _mm256_cmp_ps(gv, zero, _CMP_LT_OQ));
        __m256 step = _mm256_mul_ps(av, _mm256_sub_ps(pos, neg));
        if (mask) step = _mm256_mul_ps(step, _mm256_loadu_ps(mask + i));
        __m256 t = _mm256_add_ps(_mm256_loadu_ps(x + i), step);
        t = vmin(vmax(t, lov), hiv);
        const __m256 c = _mm256_loadu_ps(center + i);
        t = vmin(vmax(t, _mm256_sub_ps(c, ev)), _mm256_add_ps(c, ev));
        _mm256_storeu_ps(x + i, t);
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

const KernelTable& avx2_table() {
    static const KernelTable table = {
        conv2d_forward_avx2,
        conv2d_backward_data_avx2,
        scalar_table().conv2d_backward_weights, // training-only, scalar everywhere
        dense_forward_avx2,
        dense_backward_data_avx2,
        dense_backward_weights_avx2,
        relu_forward_avx2,
        relu_backward_avx2,
        pgd_step_avx2,
    };
    return table;
}

} // namespace darforge::kernels::detail

#endif // x86
