#pragma once

#include <cstddef>

// Backend kernel tables. Each backend fills one of these; dispatch picks a
// table at startup. Entries may alias the scalar implementation (training-
// only kernels are scalar everywhere).

namespace darforge::kernels::detail {

struct KernelTable {
    void (*conv2d_forward)(const float*, int, int, int, const float*, int, int, int, int,
                           const float*, float*, int, int);
    void (*conv2d_backward_data)(const float*, int, int, int, int, int,
                                 const float*, int, int, float*, int, int);
    void (*conv2d_backward_weights)(const float*, int, int, int, const float*, int, int, int,
                                    int, int, int, float*, float*);
    void (*dense_forward)(const float*, int, int, const float*, const float*, float*);
    void (*dense_backward_data)(const float*, int, int, const float*, float*);
    void (*dense_backward_weights)(const float*, int, const float*, int, float*, float*);
    void (*relu_forward)(const float*, float*, size_t);
    void (*relu_backward)(const float*, const float*, float*, size_t);
    void (*pgd_step)(float*, const float*, const float*, const float*, float, float,
                     float, float, size_t);
};

const KernelTable& scalar_table();

#if defined(__x86_64__) || defined(__i386__)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

} // namespace darforge::kernels::detail
