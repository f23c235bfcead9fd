#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "darforge/model.hpp"
#include "darforge/rng.hpp"
#include "darforge/tensor.hpp"

namespace dftest {

inline darforge::Tensor random_tensor(std::vector<int> shape, uint64_t seed, float lo = 0.0f,
                                      float hi = 1.0f) {
    darforge::Xoshiro256 rng(seed);
    darforge::Tensor t(std::move(shape));
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

inline void randomize_params(darforge::Model& m, uint64_t seed, float scale = 0.5f) {
    darforge::Xoshiro256 rng(seed);
    for (auto& l : m.layers) {
        for (size_t i = 0; i < l.weight.size(); ++i) l.weight[i] = rng.symmetric(scale);
        for (size_t i = 0; i < l.bias.size(); ++i) l.bias[i] = rng.symmetric(scale * 0.1f);
    }
}

inline darforge::Model make_model(std::vector<int> input_shape, int classes,
                                  std::vector<darforge::Layer> layers, uint64_t seed) {
    darforge::Model m;
    m.name = "test";
    m.input_shape = std::move(input_shape);
    m.num_classes = classes;
    m.layers = std::move(layers);
    randomize_params(m, seed);
    m.validate();
    return m;
}

// rel 1e-3 / abs 1e-5 style comparison; returns the worst violation margin.
inline bool grad_close(const darforge::Tensor& a, const darforge::Tensor& b, float rel,
                       float abs_tol, float* worst = nullptr) {
    bool ok = a.same_shape(b);
    float w = 0.0f;
    for (size_t i = 0; ok && i < a.size(); ++i) {
        const float diff = std::fabs(a[i] - b[i]);
        const float allow = std::max(abs_tol, rel * std::max(std::fabs(a[i]), std::fabs(b[i])));
        w = std::max(w, diff - allow);
        if (diff > allow) ok = false;
    }
    if (worst) *worst = w;
    return ok;
}

// True when the loss is locally smooth at `img`: every relu input stays
// `margin` away from its kink and every maxpool window has a top-two gap of
// at least `margin`. Central differences are only a valid oracle at such
// points.
inline bool smooth_at(const darforge::Model& m, const darforge::Tensor& img, float margin) {
    darforge::ForwardTrace trace;
    darforge::forward(m, img, trace);
    for (size_t li = 0; li < m.layers.size(); ++li) {
        const darforge::Layer& l = m.layers[li];
        const darforge::Tensor& in = trace.inputs[li];
        if (l.kind == darforge::LayerKind::relu) {
            for (size_t i = 0; i < in.size(); ++i)
                if (std::fabs(in[i]) < margin) return false;
        } else if (l.kind == darforge::LayerKind::maxpool2d) {
            const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
            const int OH = (H - l.pool) / l.pool_stride + 1;
            const int OW = (W - l.pool) / l.pool_stride + 1;
            for (int c = 0; c < C; ++c)
                for (int oy = 0; oy < OH; ++oy)
                    for (int ox = 0; ox < OW; ++ox) {
                        float best = -1e30f, second = -1e30f;
                        for (int ky = 0; ky < l.pool; ++ky)
                            for (int kx = 0; kx < l.pool; ++kx) {
                                const float v = in.at(c, oy * l.pool_stride + ky,
                                                      ox * l.pool_stride + kx);
                                if (v > best) {
                                    second = best;
                                    best = v;
                                } else if (v > second) {
                                    second = v;
                                }
                            }
                        // exact zeros behind a margin-checked relu are frozen
                        // under small perturbations; a window of them is
                        // locally constant, not a kink
                        if (best - second < margin && !(best == 0.0f && second == 0.0f))
                            return false;
                    }
        }
    }
    return true;
}

inline bool bits_equal(const darforge::Tensor& a, const darforge::Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
        if (std::signbit(a[i]) != std::signbit(b[i])) return false;
    }
    return true;
}

} // namespace dftest
