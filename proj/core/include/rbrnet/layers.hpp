#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rbrnet/gemm.hpp"
#include "rbrnet/ops.hpp"
#include "rbrnet/rng.hpp"
#include "rbrnet/tape.hpp"
#include "rbrnet/tensor.hpp"
#include "rbrnet/threading.hpp"

namespace rbrnet {

enum class Mode { train, infer };
enum class Padding { valid, same };
enum class PoolKind { max, avg };

/// Square pooling window of size `window`, applied with `stride`.
struct PoolSpec {
    PoolKind kind = PoolKind::max;
    std::int64_t window = 2;
    std::int64_t stride = 2;
};

template <typename T>
struct Conv2DLayer {
    Tensor<T> weights;  // [out_ch, in_ch, r, s]
    Tensor<T> bias;     // [out_ch]
    std::int64_t stride = 1;
    Padding padding = Padding::valid;

    std::int64_t out_channels() const { return weights.dim(0); }
    std::int64_t in_channels() const { return weights.dim(1); }

    static Conv2DLayer he_init(std::int64_t out_ch, std::int64_t in_ch, std::int64_t r,
                               std::int64_t s, Padding pad, std::uint64_t seed,
                               std::uint64_t stream) {
        if (out_ch < 1 || in_ch < 1 || r < 1 || s < 1) {
            throw ValueError("conv2d: channel and kernel dims must be >= 1");
        }
        Conv2DLayer layer;
        layer.weights = Tensor<T>::he_normal({out_ch, in_ch, r, s}, in_ch * r * s, seed, stream);
        layer.bias = Tensor<T>::zeros({out_ch});
        layer.padding = pad;
        return layer;
    }
};

template <typename T>
struct BatchNormLayer {
    Tensor<T> gamma;         // [C]
    Tensor<T> beta;          // [C]
    Tensor<T> running_mean;  // [C]
    Tensor<T> running_var;   // [C]
    T eps = static_cast<T>(1e-5);
    T momentum = static_cast<T>(0.9);

    static BatchNormLayer init(std::int64_t channels) {
        BatchNormLayer layer;
        layer.gamma = Tensor<T>::ones({channels});
        layer.beta = Tensor<T>::zeros({channels});
        layer.running_mean = Tensor<T>::zeros({channels});
        layer.running_var = Tensor<T>::ones({channels});
        return layer;
    }
};

template <typename T>
struct DenseLayer {
    Tensor<T> weights;  // [in_features, out_features]
    Tensor<T> bias;     // [out_features]

    static DenseLayer he_init(std::int64_t in_features, std::int64_t out_features,
                              std::uint64_t seed, std::uint64_t stream) {
        DenseLayer layer;
        layer.weights = Tensor<T>::he_normal({in_features, out_features}, in_features, seed, stream);
        layer.bias = Tensor<T>::zeros({out_features});
        return layer;
    }
};

namespace detail {

struct ConvGeometry {
    std::int64_t batch, in_ch, in_h, in_w;
    std::int64_t out_ch, kh, kw, stride;
    std::int64_t pad_top, pad_left;
    std::int64_t out_h, out_w;
    std::int64_t col_rows() const { return in_ch * kh * kw; }
    std::int64_t col_cols() const { return out_h * out_w; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Conv2DLayer<T>& layer) {
    if (x.ndim() != 4) {
        throw ShapeError("conv2d: expected [B x C x H x W] input, got " + shape_str(x.shape()));
    }
    ConvGeometry g{};
    g.batch = x.dim(0);
    g.in_ch = x.dim(1);
    g.in_h = x.dim(2);
    g.in_w = x.dim(3);
    g.out_ch = layer.weights.dim(0);
    g.kh = layer.weights.dim(2);
    g.kw = layer.weights.dim(3);
    g.stride = layer.stride;
    if (g.stride < 1) throw ValueError("conv2d: stride must be >= 1");
    if (layer.weights.dim(1) != g.in_ch) {
        throw ShapeError("conv2d: input has " + std::to_string(g.in_ch) + " channels, kernel wants " +
                         std::to_string(layer.weights.dim(1)));
    }
    if (layer.padding == Padding::same) {
        if (g.stride != 1) throw ValueError("conv2d: same padding is defined for stride 1 only");
        g.pad_top = (g.kh - 1) / 2;
        g.pad_left = (g.kw - 1) / 2;
        g.out_h = g.in_h;
        g.out_w = g.in_w;
    } else {
        g.pad_top = 0;
        g.pad_left = 0;
        if (g.in_h < g.kh || g.in_w < g.kw) {
            throw ShapeError("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                             " exceeds input " + std::to_string(g.in_h) + "x" +
                             std::to_string(g.in_w));
        }
        g.out_h = (g.in_h - g.kh) / g.stride + 1;
        g.out_w = (g.in_w - g.kw) / g.stride + 1;
    }
    return g;
}

/// Unroll one image [C x H x W] into a column matrix [C*kh*kw x out_h*out_w].
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
    const std::int64_t plane = g.in_h * g.in_w;
    std::int64_t row = 0;
    for (std::int64_t c = 0; c < g.in_ch; ++c) {
        for (std::int64_t u = 0; u < g.kh; ++u) {
            for (std::int64_t v = 0; v < g.kw; ++v, ++row) {
                T* dst = col + row * g.col_cols();
                for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
                    const std::int64_t ih = oh * g.stride + u - g.pad_top;
                    if (ih < 0 || ih >= g.in_h) {
                        for (std::int64_t ow = 0; ow < g.out_w; ++ow) *dst++ = T(0);
                        continue;
                    }
                    const T* src = x + c * plane + ih * g.in_w;
                    for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
                        const std::int64_t iw = ow * g.stride + v - g.pad_left;
                        *dst++ = (iw < 0 || iw >= g.in_w) ? T(0) : src[iw];
                    }
                }
            }
        }
    }
}

/// Scatter a column-matrix gradient back onto one image, accumulating.
template <typename T>
void col2im_accum(const T* col, const ConvGeometry& g, T* dx) {
    const std::int64_t plane = g.in_h * g.in_w;
    std::int64_t row = 0;
    for (std::int64_t c = 0; c < g.in_ch; ++c) {
        for (std::int64_t u = 0; u < g.kh; ++u) {
            for (std::int64_t v = 0; v < g.kw; ++v, ++row) {
                const T* src = col + row * g.col_cols();
                for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
                    const std::int64_t ih = oh * g.stride + u - g.pad_top;
                    const T* srow = src + oh * g.out_w;
                    if (ih < 0 || ih >= g.in_h) continue;
                    T* dst = dx + c * plane + ih * g.in_w;
                    for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
                        const std::int64_t iw = ow * g.stride + v - g.pad_left;
                        if (iw >= 0 && iw < g.in_w) dst[iw] += srow[ow];
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// 2-D convolution (im2col + matmul path) with per-output-channel bias.
/// Padding::same keeps the spatial dims (stride 1); Padding::valid shrinks
/// them to (H - kh)/stride + 1 x (W - kw)/stride + 1.
template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Conv2DLayer<T>& layer) {
    const detail::ConvGeometry g = detail::conv_geometry(x, layer);
    Tensor<T> out = Tensor<T>::zeros({g.batch, g.out_ch, g.out_h, g.out_w});

    const T* w = layer.weights.data().data();  // viewed as [out_ch x (C*kh*kw)]
    const T* bias = layer.bias.data().data();
    const std::int64_t cols = g.col_cols();
    const std::int64_t rows = g.col_rows();
    const std::int64_t in_sz = g.in_ch * g.in_h * g.in_w;
    const std::int64_t out_sz = g.out_ch * cols;

    const T* xd = x.data().data();
    T* od = out.data().data();
    parallel_for(static_cast<std::size_t>(g.batch), [&](std::size_t b0, std::size_t b1) {
        std::vector<T> col(static_cast<std::size_t>(rows * cols));
        for (std::size_t b = b0; b < b1; ++b) {
            detail::im2col(xd + b * in_sz, g, col.data());
            T* ob = od + b * out_sz;
            detail::gemm_nn(g.out_ch, cols, rows, w, col.data(), ob, false);
            for (std::int64_t f = 0; f < g.out_ch; ++f) {
                T* orow = ob + f * cols;
                for (std::int64_t i = 0; i < cols; ++i) orow[i] += bias[f];
            }
        }
    });

    const bool track = tape != nullptr && (x.requires_grad() || layer.weights.requires_grad() ||
                                           layer.bias.requires_grad());
    if (track) {
        auto sx = x.storage();
        auto sw = layer.weights.storage();
        auto sb = layer.bias.storage();
        auto so = out.storage();
        tape->record(out, [sx, sw, sb, so, g, rows, cols, in_sz, out_sz] {
            const std::size_t batch = static_cast<std::size_t>(g.batch);
            // Per-item weight/bias partials, reduced in item order afterwards,
            // keep the result independent of the worker count.
            std::vector<std::vector<T>> dw_parts(sw->tracked ? batch : 0);
            std::vector<std::vector<T>> db_parts(sb->tracked ? batch : 0);
            parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
                std::vector<T> col(static_cast<std::size_t>(rows * cols));
                std::vector<T> dcol(static_cast<std::size_t>(rows * cols));
                for (std::size_t b = b0; b < b1; ++b) {
                    const T* dout_b = so->grad.data() + b * out_sz;
                    if (sw->tracked) {
                        detail::im2col(sx->data.data() + b * in_sz, g, col.data());
                        dw_parts[b].assign(sw->data.size(), T(0));
                        detail::gemm_nt(g.out_ch, rows, cols, dout_b, col.data(),
                                        dw_parts[b].data(), true);
                    }
                    if (sb->tracked) {
                        db_parts[b].assign(sb->data.size(), T(0));
                        for (std::int64_t f = 0; f < g.out_ch; ++f) {
                            T acc = T(0);
                            const T* orow = dout_b + f * cols;
                            for (std::int64_t i = 0; i < cols; ++i) acc += orow[i];
                            db_parts[b][static_cast<std::size_t>(f)] = acc;
                        }
                    }
                    if (sx->tracked) {
                        detail::gemm_tn(rows, cols, g.out_ch, sw->data.data(), dout_b, dcol.data(),
                                        false);
                        detail::col2im_accum(dcol.data(), g, sx->grad.data() + b * in_sz);
                    }
                }
            });
            for (std::size_t b = 0; b < dw_parts.size(); ++b) {
                for (std::size_t i = 0; i < sw->grad.size(); ++i) sw->grad[i] += dw_parts[b][i];
            }
            for (std::size_t b = 0; b < db_parts.size(); ++b) {
                for (std::size_t i = 0; i < sb->grad.size(); ++i) sb->grad[i] += db_parts[b][i];
            }
        });
    }
    return out;
}

/// Max or average pooling over square windows. Average distributes gradient
/// uniformly (1/t^2 each); max routes it to the first maximizer in linear
/// window order.
template <typename T>
Tensor<T> pool2d(Tape<T>* tape, const Tensor<T>& x, const PoolSpec& spec) {
    if (x.ndim() != 4) {
        throw ShapeError("pool2d: expected [B x C x H x W] input, got " + shape_str(x.shape()));
    }
    if (spec.window < 1 || spec.stride < 1) throw ValueError("pool2d: window and stride must be >= 1");
    const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t t = spec.window;
    if (t > H || t > W) {
        throw ShapeError("pool2d: window " + std::to_string(t) + " exceeds input " +
                         std::to_string(H) + "x" + std::to_string(W));
    }
    const std::int64_t Ho = (H - t) / spec.stride + 1;
    const std::int64_t Wo = (W - t) / spec.stride + 1;
    Tensor<T> out = Tensor<T>::zeros({B, C, Ho, Wo});

    const T* xd = x.data().data();
    T* od = out.data().data();
    const bool is_max = spec.kind == PoolKind::max;
    const T inv_area = T(1) / static_cast<T>(t * t);
    std::vector<std::int64_t> argmax(is_max ? static_cast<std::size_t>(B * C * Ho * Wo) : 0);

    std::int64_t o = 0;
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
        const T* plane = xd + bc * H * W;
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
            for (std::int64_t ow = 0; ow < Wo; ++ow, ++o) {
                const std::int64_t h0 = oh * spec.stride, w0 = ow * spec.stride;
                if (is_max) {
                    std::int64_t best = h0 * W + w0;
                    T best_v = plane[best];
                    for (std::int64_t u = 0; u < t; ++u) {
                        for (std::int64_t v = 0; v < t; ++v) {
                            const std::int64_t idx = (h0 + u) * W + (w0 + v);
                            if (plane[idx] > best_v) {
                                best_v = plane[idx];
                                best = idx;
                            }
                        }
                    }
                    od[o] = best_v;
                    argmax[o] = bc * H * W + best;
                } else {
                    T acc = T(0);
                    for (std::int64_t u = 0; u < t; ++u) {
                        for (std::int64_t v = 0; v < t; ++v) acc += plane[(h0 + u) * W + (w0 + v)];
                    }
                    od[o] = acc * inv_area;
                }
            }
        }
    }

    if (detail::should_record(tape, x)) {
        auto sx = x.storage();
        auto so = out.storage();
        if (is_max) {
            tape->record(out, [sx, so, idx = std::move(argmax)] {
                for (std::size_t i = 0; i < so->grad.size(); ++i) sx->grad[idx[i]] += so->grad[i];
            });
        } else {
            const std::int64_t stride = spec.stride;
            tape->record(out, [sx, so, B, C, H, W, Ho, Wo, t, stride, inv_area] {
                std::int64_t i = 0;
                for (std::int64_t bc = 0; bc < B * C; ++bc) {
                    T* gplane = sx->grad.data() + bc * H * W;
                    for (std::int64_t oh = 0; oh < Ho; ++oh) {
                        for (std::int64_t ow = 0; ow < Wo; ++ow, ++i) {
                            const T g = so->grad[i] * inv_area;
                            const std::int64_t h0 = oh * stride, w0 = ow * stride;
                            for (std::int64_t u = 0; u < t; ++u) {
                                for (std::int64_t v = 0; v < t; ++v) {
                                    gplane[(h0 + u) * W + (w0 + v)] += g;
                                }
                            }
                        }
                    }
                }
            });
        }
    }
    return out;
}

/// Global average pool: [B x C x H x W] -> [B x C].
template <typename T>
Tensor<T> global_avg_pool(Tape<T>* tape, const Tensor<T>& x) {
    if (x.ndim() != 4) {
        throw ShapeError("global_avg_pool: expected 4-D input, got " + shape_str(x.shape()));
    }
    const std::int64_t B = x.dim(0), C = x.dim(1), area = x.dim(2) * x.dim(3);
    Tensor<T> out = Tensor<T>::zeros({B, C});
    const T inv = T(1) / static_cast<T>(area);
    const T* xd = x.data().data();
    T* od = out.data().data();
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
        T acc = T(0);
        const T* plane = xd + bc * area;
        for (std::int64_t i = 0; i < area; ++i) acc += plane[i];
        od[bc] = acc * inv;
    }
    if (detail::should_record(tape, x)) {
        auto sx = x.storage();
        auto so = out.storage();
        tape->record(out, [sx, so, area, inv] {
            for (std::size_t bc = 0; bc < so->grad.size(); ++bc) {
                const T g = so->grad[bc] * inv;
                T* gplane = sx->grad.data() + bc * area;
                for (std::int64_t i = 0; i < area; ++i) gplane[i] += g;
            }
        });
    }
    return out;
}

/// Batch normalization over (B, H, W) per channel. Train mode uses batch
/// statistics and updates running stats as r <- momentum*r + (1-momentum)*batch;
/// infer mode normalizes with the running stats.
template <typename T>
Tensor<T> batchnorm(Tape<T>* tape, const Tensor<T>& x, BatchNormLayer<T>& layer, Mode mode) {
    if (x.ndim() != 4) {
        throw ShapeError("batchnorm: expected [B x C x H x W] input, got " + shape_str(x.shape()));
    }
    const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (layer.gamma.numel() != C) {
        throw ShapeError("batchnorm: layer has " + std::to_string(layer.gamma.numel()) +
                         " channels, input has " + std::to_string(C));
    }
    const std::int64_t m = B * H * W;
    const std::int64_t plane = H * W;
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xd = x.data().data();
    T* od = out.data().data();
    const T* gamma = layer.gamma.data().data();
    const T* beta = layer.beta.data().data();

    if (mode == Mode::infer) {
        const T* rm = layer.running_mean.data().data();
        const T* rv = layer.running_var.data().data();
        std::vector<T> inv_std(static_cast<std::size_t>(C));
        for (std::int64_t c = 0; c < C; ++c) {
            inv_std[c] = T(1) / std::sqrt(rv[c] + layer.eps);
        }
        for (std::int64_t b = 0; b < B; ++b) {
            for (std::int64_t c = 0; c < C; ++c) {
                const T* src = xd + (b * C + c) * plane;
                T* dst = od + (b * C + c) * plane;
                const T a = gamma[c] * inv_std[c];
                const T shift = beta[c] - a * rm[c];
                for (std::int64_t i = 0; i < plane; ++i) dst[i] = a * src[i] + shift;
            }
        }
        if (tape != nullptr &&
            (x.requires_grad() || layer.gamma.requires_grad() || layer.beta.requires_grad())) {
            auto sx = x.storage();
            auto sg = layer.gamma.storage();
            auto sb = layer.beta.storage();
            auto so = out.storage();
            auto srm = layer.running_mean.storage();
            tape->record(out, [sx, sg, sb, so, srm, inv_std, B, C, plane] {
                for (std::int64_t b = 0; b < B; ++b) {
                    for (std::int64_t c = 0; c < C; ++c) {
                        const std::size_t base = static_cast<std::size_t>((b * C + c) * plane);
                        const T a = sg->data[c] * inv_std[c];
                        for (std::int64_t i = 0; i < plane; ++i) {
                            const T g = so->grad[base + i];
                            if (sx->tracked) sx->grad[base + i] += a * g;
                            if (sg->tracked) {
                                sg->grad[c] += g * (sx->data[base + i] - srm->data[c]) * inv_std[c];
                            }
                            if (sb->tracked) sb->grad[c] += g;
                        }
                    }
                }
            });
        }
        return out;
    }

    if (m < 2) {
        throw ValueError("batchnorm: degenerate batch, need B*H*W >= 2 per channel in train mode");
    }

    std::vector<T> mean(static_cast<std::size_t>(C), T(0));
    std::vector<T> var(static_cast<std::size_t>(C), T(0));
    std::vector<T> inv_std(static_cast<std::size_t>(C));
    const T inv_m = T(1) / static_cast<T>(m);
    for (std::int64_t c = 0; c < C; ++c) {
        T acc = T(0);
        for (std::int64_t b = 0; b < B; ++b) {
            const T* src = xd + (b * C + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) acc += src[i];
        }
        mean[c] = acc * inv_m;
        T vacc = T(0);
        for (std::int64_t b = 0; b < B; ++b) {
            const T* src = xd + (b * C + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                const T d = src[i] - mean[c];
                vacc += d * d;
            }
        }
        var[c] = vacc * inv_m;
        inv_std[c] = T(1) / std::sqrt(var[c] + layer.eps);
    }

    // xhat is saved for the backward rule.
    std::vector<T> xhat(static_cast<std::size_t>(B * C * plane));
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t c = 0; c < C; ++c) {
            const std::size_t base = static_cast<std::size_t>((b * C + c) * plane);
            for (std::int64_t i = 0; i < plane; ++i) {
                const T h = (xd[base + i] - mean[c]) * inv_std[c];
                xhat[base + i] = h;
                od[base + i] = gamma[c] * h + beta[c];
            }
        }
    }

    {
        auto rm = layer.running_mean.data();
        auto rv = layer.running_var.data();
        for (std::int64_t c = 0; c < C; ++c) {
            rm[c] = layer.momentum * rm[c] + (T(1) - layer.momentum) * mean[c];
            rv[c] = layer.momentum * rv[c] + (T(1) - layer.momentum) * var[c];
        }
    }

    if (tape != nullptr &&
        (x.requires_grad() || layer.gamma.requires_grad() || layer.beta.requires_grad())) {
        auto sx = x.storage();
        auto sg = layer.gamma.storage();
        auto sb = layer.beta.storage();
        auto so = out.storage();
        tape->record(out, [sx, sg, sb, so, hat = std::move(xhat), inv_std, B, C, plane, inv_m] {
            for (std::int64_t c = 0; c < C; ++c) {
                // Channel-wise reductions of dL/dy and dL/dy * xhat.
                T sum_g = T(0), sum_gh = T(0);
                for (std::int64_t b = 0; b < B; ++b) {
                    const std::size_t base = static_cast<std::size_t>((b * C + c) * plane);
                    for (std::int64_t i = 0; i < plane; ++i) {
                        sum_g += so->grad[base + i];
                        sum_gh += so->grad[base + i] * hat[base + i];
                    }
                }
                if (sg->tracked) sg->grad[c] += sum_gh;
                if (sb->tracked) sb->grad[c] += sum_g;
                if (sx->tracked) {
                    const T a = sg->data[c] * inv_std[c];
                    for (std::int64_t b = 0; b < B; ++b) {
                        const std::size_t base = static_cast<std::size_t>((b * C + c) * plane);
                        for (std::int64_t i = 0; i < plane; ++i) {
                            const T g = so->grad[base + i];
                            sx->grad[base + i] +=
                                a * (g - inv_m * sum_g - inv_m * hat[base + i] * sum_gh);
                        }
                    }
                }
            }
        });
    }
    return out;
}

/// Dense layer: out[B x out] = x[B x in] * W[in x out] + bias.
template <typename T>
Tensor<T> dense(Tape<T>* tape, const Tensor<T>& x, const DenseLayer<T>& layer) {
    if (x.ndim() != 2) {
        throw ShapeError("dense: expected [B x features] input, got " + shape_str(x.shape()));
    }
    const std::int64_t B = x.dim(0), in_f = x.dim(1), out_f = layer.weights.dim(1);
    if (layer.weights.dim(0) != in_f) {
        throw ShapeError("dense: input has " + std::to_string(in_f) + " features, weights want " +
                         std::to_string(layer.weights.dim(0)));
    }
    Tensor<T> out = Tensor<T>::zeros({B, out_f});
    detail::gemm_nn(B, out_f, in_f, x.data().data(), layer.weights.data().data(),
                    out.data().data(), false);
    {
        T* od = out.data().data();
        const T* bias = layer.bias.data().data();
        for (std::int64_t b = 0; b < B; ++b) {
            for (std::int64_t j = 0; j < out_f; ++j) od[b * out_f + j] += bias[j];
        }
    }
    const bool track = tape != nullptr && (x.requires_grad() || layer.weights.requires_grad() ||
                                           layer.bias.requires_grad());
    if (track) {
        auto sx = x.storage();
        auto sw = layer.weights.storage();
        auto sb = layer.bias.storage();
        auto so = out.storage();
        tape->record(out, [sx, sw, sb, so, B, in_f, out_f] {
            if (sx->tracked) {
                detail::gemm_nt(B, in_f, out_f, so->grad.data(), sw->data.data(), sx->grad.data(),
                                true);
            }
            if (sw->tracked) {
                detail::gemm_tn(in_f, out_f, B, sx->data.data(), so->grad.data(), sw->grad.data(),
                                true);
            }
            if (sb->tracked) {
                for (std::int64_t b = 0; b < B; ++b) {
                    for (std::int64_t j = 0; j < out_f; ++j) {
                        sb->grad[j] += so->grad[b * out_f + j];
                    }
                }
            }
        });
    }
    return out;
}

/// Inverted dropout: train mode zeroes each element with probability `rate`
/// and scales survivors by 1/(1-rate); infer mode is the identity. The mask
/// is a pure function of (seed, element index).
template <typename T>
Tensor<T> dropout(Tape<T>* tape, const Tensor<T>& x, double rate, Mode mode, std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ValueError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (mode == Mode::infer || rate == 0.0) return x;

    constexpr std::uint64_t kStream = 0xd70u;
    const T inv_keep = static_cast<T>(1.0 / (1.0 - rate));
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto od = out.data();
    auto xd = x.data();
    for (std::size_t i = 0; i < od.size(); ++i) {
        od[i] = rng_uniform(seed, kStream, i) < rate ? T(0) : xd[i] * inv_keep;
    }
    if (detail::should_record(tape, x)) {
        auto sx = x.storage();
        auto so = out.storage();
        tape->record(out, [sx, so, rate, seed, inv_keep] {
            for (std::size_t i = 0; i < so->grad.size(); ++i) {
                if (rng_uniform(seed, kStream, i) >= rate) sx->grad[i] += so->grad[i] * inv_keep;
            }
        });
    }
    return out;
}

template <typename T>
struct SoftmaxLoss {
    Tensor<T> loss;   // scalar, mean over the batch
    Tensor<T> probs;  // [B x K], detached
};

/// Numerically stable softmax + cross-entropy, fused. Gradient wrt logits is
/// (probs - onehot(labels)) / B.
template <typename T>
SoftmaxLoss<T> softmax_cross_entropy(Tape<T>* tape, const Tensor<T>& logits,
                                     const std::vector<int>& labels) {
    if (logits.ndim() != 2) {
        throw ShapeError("softmax_cross_entropy: expected [B x K] logits, got " +
                         shape_str(logits.shape()));
    }
    const std::int64_t B = logits.dim(0), K = logits.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != B) {
        throw ValueError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(B));
    }
    for (int y : labels) {
        if (y < 0 || y >= K) {
            throw ValueError("softmax_cross_entropy: label " + std::to_string(y) +
                             " out of range [0, " + std::to_string(K) + ")");
        }
    }
    Tensor<T> probs = Tensor<T>::zeros({B, K});
    const T* ld = logits.data().data();
    T* pd = probs.data().data();
    T loss_acc = T(0);
    for (std::int64_t b = 0; b < B; ++b) {
        const T* row = ld + b * K;
        T mx = row[0];
        for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        T z = T(0);
        for (std::int64_t k = 0; k < K; ++k) {
            const T e = std::exp(row[k] - mx);
            pd[b * K + k] = e;
            z += e;
        }
        const T inv_z = T(1) / z;
        for (std::int64_t k = 0; k < K; ++k) pd[b * K + k] *= inv_z;
        loss_acc -= row[labels[b]] - mx - std::log(z);
    }
    Tensor<T> loss = Tensor<T>::scalar(loss_acc / static_cast<T>(B));
    if (detail::should_record(tape, logits)) {
        auto sl = logits.storage();
        auto sp = probs.storage();
        auto so = loss.storage();
        tape->record(loss, [sl, sp, so, labels, B, K] {
            const T g = so->grad[0] / static_cast<T>(B);
            for (std::int64_t b = 0; b < B; ++b) {
                for (std::int64_t k = 0; k < K; ++k) {
                    const T onehot = labels[b] == static_cast<int>(k) ? T(1) : T(0);
                    sl->grad[b * K + k] += g * (sp->data[b * K + k] - onehot);
                }
            }
        });
    }
    return {loss, probs};
}

}  // namespace rbrnet
