#pragma once

#include <cstdint>
#include <optional>

#include "rbrnet/layers.hpp"

namespace rbrnet {

/// Feed-forward unit: conv -> batchnorm -> ReLU -> pool, no skip path.
template <typename T>
struct SpatialBlock {
    Conv2DLayer<T> conv;
    BatchNormLayer<T> bn;
    PoolSpec pool;

    static SpatialBlock init(std::int64_t in_ch, std::int64_t filters, std::int64_t kernel,
                             PoolSpec pool, std::uint64_t seed, std::uint64_t& stream) {
        SpatialBlock b;
        b.conv = Conv2DLayer<T>::he_init(filters, in_ch, kernel, kernel, Padding::same, seed,
                                         stream++);
        b.bn = BatchNormLayer<T>::init(filters);
        b.pool = pool;
        return b;
    }

    Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, Mode mode) {
        return pool2d(tape, relu(tape, batchnorm(tape, conv2d(tape, x, conv), bn, mode)), pool);
    }
};

/// Residual unit: y = relu(BN(conv2(relu(BN(conv1(x))))) + proj(x)), where
/// proj is the identity when channel counts match and a 1x1 conv + BN
/// otherwise. An optional pooling downsample applies after the add + relu.
template <typename T>
struct ResidualBlock {
    Conv2DLayer<T> conv1, conv2;
    BatchNormLayer<T> bn1, bn2;
    bool has_projection = false;
    Conv2DLayer<T> proj;
    BatchNormLayer<T> proj_bn;
    std::optional<PoolSpec> downsample;

    static ResidualBlock init(std::int64_t in_ch, std::int64_t filters, std::int64_t kernel,
                              std::optional<PoolSpec> downsample, std::uint64_t seed,
                              std::uint64_t& stream) {
        ResidualBlock b;
        b.conv1 =
            Conv2DLayer<T>::he_init(filters, in_ch, kernel, kernel, Padding::same, seed, stream++);
        b.bn1 = BatchNormLayer<T>::init(filters);
        b.conv2 =
            Conv2DLayer<T>::he_init(filters, filters, kernel, kernel, Padding::same, seed, stream++);
        b.bn2 = BatchNormLayer<T>::init(filters);
        b.has_projection = in_ch != filters;
        if (b.has_projection) {
            b.proj = Conv2DLayer<T>::he_init(filters, in_ch, 1, 1, Padding::valid, seed, stream++);
            b.proj_bn = BatchNormLayer<T>::init(filters);
        }
        b.downsample = downsample;
        return b;
    }

    Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, Mode mode) {
        Tensor<T> h = relu(tape, batchnorm(tape, conv2d(tape, x, conv1), bn1, mode));
        h = batchnorm(tape, conv2d(tape, h, conv2), bn2, mode);
        Tensor<T> skip = x;
        if (has_projection) {
            skip = batchnorm(tape, conv2d(tape, x, proj), proj_bn, mode);
        }
        Tensor<T> y = relu(tape, add(tape, h, skip));
        if (downsample) y = pool2d(tape, y, *downsample);
        return y;
    }
};

}  // namespace rbrnet
