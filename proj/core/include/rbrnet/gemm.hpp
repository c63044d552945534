#pragma once

#include <cstdint>

namespace rbrnet::detail {

// Single-threaded dense matrix kernels with a fixed accumulation order, so
// results are bit-reproducible. Row-major throughout.

/// C[m x n] (+)= A[m x k] * B[k x n]
template <typename T>
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        if (!accumulate) {
            for (std::int64_t j = 0; j < n; ++j) crow[j] = T(0);
        }
        const T* arow = a + i * k;
        for (std::int64_t l = 0; l < k; ++l) {
            const T alpha = arow[l];
            const T* brow = b + l * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += alpha * brow[j];
        }
    }
}

/// C[m x n] (+)= A[m x k] * B^T where B is [n x k]
template <typename T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate) {
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = T(0);
            for (std::int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            if (accumulate) {
                crow[j] += acc;
            } else {
                crow[j] = acc;
            }
        }
    }
}

/// C[m x n] (+)= A^T * B where A is [k x m], B is [k x n]
template <typename T>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c,
             bool accumulate) {
    if (!accumulate) {
        for (std::int64_t i = 0; i < m * n; ++i) c[i] = T(0);
    }
    for (std::int64_t l = 0; l < k; ++l) {
        const T* arow = a + l * m;
        const T* brow = b + l * n;
        for (std::int64_t i = 0; i < m; ++i) {
            const T alpha = arow[i];
            T* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += alpha * brow[j];
        }
    }
}

}  // namespace rbrnet::detail
