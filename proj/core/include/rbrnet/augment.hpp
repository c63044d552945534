#pragma once

#include <cstdint>

#include "rbrnet/tensor.hpp"

namespace rbrnet {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Sampling ranges for the augmentation pipeline. Degenerate ranges
/// (lo == hi) and probabilities of 0/1 pin a parameter, which is how tests
/// force specific transforms.
struct AugmentSpec {
    bool enabled = true;
    Range rotation_deg{0.0, 360.0};
    Range scale{0.5, 1.0};
    Range shear{-0.05, 0.05};
    double reflect_h_prob = 0.5;
    double reflect_v_prob = 0.5;

    void validate() const;
};

struct AugmentParams {
    bool reflect_h = false;
    bool reflect_v = false;
    double rotation_deg = 0.0;
    double scale = 1.0;
    double shear = 0.0;
};

/// Draw parameters uniformly from the spec ranges, deterministically in seed.
AugmentParams sample_augment_params(const AugmentSpec& spec, std::uint64_t seed);

/// Apply reflect -> rotate -> scale -> shear as one affine transform about
/// the image center, resampling bilinearly with 0 fill outside the frame.
/// Shape is preserved.
Tensor<float> augment(const Tensor<float>& chw, const AugmentParams& params);

/// Sample parameters from the spec and apply them. Disabled specs return the
/// input unchanged.
Tensor<float> augment(const Tensor<float>& chw, const AugmentSpec& spec, std::uint64_t seed);

}  // namespace rbrnet
