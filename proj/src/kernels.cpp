#include "darforge/kernels.hpp"

#include <atomic>
#include <stdexcept>

#include "kernels_internal.hpp"

namespace darforge::kernels {
namespace {

using detail::KernelTable;

Backend detect_best() {
#if defined(__x86_64__) || defined(__i386__)
    if (__builtin_cpu_supports("avx2")) return Backend::avx2;
    return Backend::scalar;
#elif defined(__aarch64__)
    return Backend::neon;
#else
    return Backend::scalar;
#endif
}

const KernelTable* table_for(Backend b) {
    switch (b) {
        case Backend::scalar: return &detail::scalar_table();
#if defined(__x86_64__) || defined(__i386__)
        case Backend::avx2: return &detail::avx2_table();
#endif
#if defined(__aarch64__)
        case Backend::neon: return &detail::neon_table();
#endif
        default: return nullptr;
    }
}

struct Dispatch {
    std::atomic<const KernelTable*> table;
    std::atomic<Backend> backend;
    Dispatch() {
        const Backend b = detect_best();
        backend.store(b);
        table.store(table_for(b));
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

const KernelTable& t() { return *dispatch().table.load(std::memory_order_relaxed); }

} // namespace

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "?";
}

bool backend_supported(Backend b) { return table_for(b) != nullptr; }

Backend active_backend() { return dispatch().backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    const KernelTable* tab = table_for(b);
    if (!tab)
        throw std::invalid_argument(std::string("kernel backend not supported here: ") +
                                    backend_name(b));
    dispatch().backend.store(b);
    dispatch().table.store(tab);
}

void conv2d_forward(const float* in, int C, int H, int W,
                    const float* w, int OC, int K, int stride, int pad,
                    const float* bias, float* out, int OH, int OW) {
    t().conv2d_forward(in, C, H, W, w, OC, K, stride, pad, bias, out, OH, OW);
}

void conv2d_backward_data(const float* w, int OC, int C, int K, int stride, int pad,
                          const float* gout, int OH, int OW, float* gin, int H, int W) {
    t().conv2d_backward_data(w, OC, C, K, stride, pad, gout, OH, OW, gin, H, W);
}

void conv2d_backward_weights(const float* in, int C, int H, int W,
                             const float* gout, int OC, int OH, int OW,
                             int K, int stride, int pad, float* gw, float* gb) {
    t().conv2d_backward_weights(in, C, H, W, gout, OC, OH, OW, K, stride, pad, gw, gb);
}

void dense_forward(const float* w, int out_dim, int in_dim,
                   const float* b, const float* x, float* y) {
    t().dense_forward(w, out_dim, in_dim, b, x, y);
}

void dense_backward_data(const float* w, int out_dim, int in_dim,
                         const float* gy, float* gx) {
    t().dense_backward_data(w, out_dim, in_dim, gy, gx);
}

void dense_backward_weights(const float* x, int in_dim,
                            const float* gy, int out_dim, float* gw, float* gb) {
    t().dense_backward_weights(x, in_dim, gy, out_dim, gw, gb);
}

void relu_forward(const float* x, float* y, size_t n) { t().relu_forward(x, y, n); }

void relu_backward(const float* x, const float* gy, float* gx, size_t n) {
    t().relu_backward(x, gy, gx, n);
}

void pgd_step(float* x, const float* g, const float* mask, const float* center,
              float alpha, float eps, float px_lo, float px_hi, size_t n) {
    t().pgd_step(x, g, mask, center, alpha, eps, px_lo, px_hi, n);
}

} // namespace darforge::kernels
