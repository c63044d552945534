#pragma once

#include <cstdint>

#include "rbrnet/gemm.hpp"
#include "rbrnet/tape.hpp"
#include "rbrnet/tensor.hpp"

namespace rbrnet {

// Elementwise and matrix ops over tensors. Each op computes its result
// eagerly and, when a tape is supplied and any input is tracked, records a
// reverse rule on the tape. Passing tape == nullptr runs pure inference.
//
// Binary elementwise ops require identical shapes; there is no broadcasting.

namespace detail {

template <typename T>
inline void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

template <typename T>
inline bool should_record(const Tape<T>* tape, const Tensor<T>& a) {
    return tape != nullptr && a.requires_grad();
}

template <typename T>
inline bool should_record(const Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    return tape != nullptr && (a.requires_grad() || b.requires_grad());
}

}  // namespace detail

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape("add", a, b);
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
    if (detail::should_record(tape, a, b)) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        tape->record(out, [sa, sb, so] {
            const auto& og = so->grad;
            if (sa->tracked) {
                for (std::size_t i = 0; i < og.size(); ++i) sa->grad[i] += og[i];
            }
            if (sb->tracked) {
                for (std::size_t i = 0; i < og.size(); ++i) sb->grad[i] += og[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> sub(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape("sub", a, b);
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
    if (detail::should_record(tape, a, b)) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        tape->record(out, [sa, sb, so] {
            const auto& og = so->grad;
            if (sa->tracked) {
                for (std::size_t i = 0; i < og.size(); ++i) sa->grad[i] += og[i];
            }
            if (sb->tracked) {
                for (std::size_t i = 0; i < og.size(); ++i) sb->grad[i] -= og[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape("mul", a, b);
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
    if (detail::should_record(tape, a, b)) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        tape->record(out, [sa, sb, so] {
            const auto& og = so->grad;
            if (sa->tracked) {
                for (std::size_t i = 0; i < og.size(); ++i) sa->grad[i] += og[i] * sb->data[i];
            }
            if (sb->tracked) {
                for (std::size_t i = 0; i < og.size(); ++i) sb->grad[i] += og[i] * sa->data[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& a, T factor) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = factor * ad[i];
    if (detail::should_record(tape, a)) {
        auto sa = a.storage(), so = out.storage();
        tape->record(out, [sa, so, factor] {
            const auto& og = so->grad;
            for (std::size_t i = 0; i < og.size(); ++i) sa->grad[i] += factor * og[i];
        });
    }
    return out;
}

/// ReLU with subgradient 0 at the origin (gradient passes only where x > 0).
template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& a) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto od = out.data();
    auto ad = a.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] > T(0) ? ad[i] : T(0);
    if (detail::should_record(tape, a)) {
        auto sa = a.storage(), so = out.storage();
        tape->record(out, [sa, so] {
            const auto& og = so->grad;
            for (std::size_t i = 0; i < og.size(); ++i) {
                if (sa->data[i] > T(0)) sa->grad[i] += og[i];
            }
        });
    }
    return out;
}

/// C = A x B for A [m x k], B [k x n]. Grads: dA = dC * B^T, dB = A^T * dC.
template <typename T>
Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw ShapeError("matmul: expected 2-D operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor<T> out = Tensor<T>::zeros({m, n});
    detail::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data().data(), false);
    if (detail::should_record(tape, a, b)) {
        auto sa = a.storage(), sb = b.storage(), so = out.storage();
        tape->record(out, [sa, sb, so, m, n, k] {
            if (sa->tracked) {
                detail::gemm_nt(m, k, n, so->grad.data(), sb->data.data(), sa->grad.data(), true);
            }
            if (sb->tracked) {
                detail::gemm_tn(k, n, m, sa->data.data(), so->grad.data(), sb->grad.data(), true);
            }
        });
    }
    return out;
}

/// Sum of all elements; result has shape [1].
template <typename T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& a) {
    T acc = T(0);
    for (T v : a.data()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(acc);
    if (detail::should_record(tape, a)) {
        auto sa = a.storage(), so = out.storage();
        tape->record(out, [sa, so] {
            const T g = so->grad[0];
            for (auto& gi : sa->grad) gi += g;
        });
    }
    return out;
}

}  // namespace rbrnet
