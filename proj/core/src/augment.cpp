#include "rbrnet/augment.hpp"

#include <cmath>

#include "rbrnet/errors.hpp"
#include "rbrnet/rng.hpp"

namespace rbrnet {

namespace {

constexpr std::uint64_t kAugmentStream = 0xa36u;
constexpr double kPi = 3.1415926535897932384626433832795;

struct Mat2 {
    // row-major 2x2
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }

    Mat2 inverse() const {
        const double det = a * d - b * c;
        return {d / det, -b / det, -c / det, a / det};
    }
};

}  // namespace

void AugmentSpec::validate() const {
    if (rotation_deg.lo > rotation_deg.hi || scale.lo > scale.hi || shear.lo > shear.hi) {
        throw ValueError("augment: range lo must not exceed hi");
    }
    if (scale.lo <= 0.0) throw ValueError("augment: scale must be positive");
    if (reflect_h_prob < 0.0 || reflect_h_prob > 1.0 || reflect_v_prob < 0.0 ||
        reflect_v_prob > 1.0) {
        throw ValueError("augment: reflection probabilities must lie in [0, 1]");
    }
}

AugmentParams sample_augment_params(const AugmentSpec& spec, std::uint64_t seed) {
    spec.validate();
    AugmentParams p;
    p.reflect_h = rng_uniform(seed, kAugmentStream, 0) < spec.reflect_h_prob;
    p.reflect_v = rng_uniform(seed, kAugmentStream, 1) < spec.reflect_v_prob;
    p.rotation_deg =
        rng_uniform_range(seed, kAugmentStream, 2, spec.rotation_deg.lo, spec.rotation_deg.hi);
    p.scale = rng_uniform_range(seed, kAugmentStream, 3, spec.scale.lo, spec.scale.hi);
    p.shear = rng_uniform_range(seed, kAugmentStream, 4, spec.shear.lo, spec.shear.hi);
    return p;
}

Tensor<float> augment(const Tensor<float>& chw, const AugmentParams& params) {
    if (chw.ndim() != 3) throw ShapeError("augment: expected [C x H x W] image tensor");
    const std::int64_t C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
    const std::int64_t plane = H * W;

    // Forward map applied to centered pixel coordinates (x right, y down):
    // shear . scale . rotation . reflection. Resampling walks the inverse.
    const Mat2 reflect{params.reflect_h ? -1.0 : 1.0, 0.0, 0.0, params.reflect_v ? -1.0 : 1.0};
    const double theta = params.rotation_deg * kPi / 180.0;
    const Mat2 rotate{std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta)};
    const Mat2 scale{params.scale, 0.0, 0.0, params.scale};
    const Mat2 shear{1.0, params.shear, 0.0, 1.0};
    const Mat2 inv = (shear * scale * rotate * reflect).inverse();

    const double cx = (W - 1) / 2.0;
    const double cy = (H - 1) / 2.0;

    Tensor<float> out = Tensor<float>::zeros(chw.shape());
    auto src = chw.data();
    auto dst = out.data();
    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
            const double qx = x - cx;
            const double qy = y - cy;
            const double sx = inv.a * qx + inv.b * qy + cx;
            const double sy = inv.c * qx + inv.d * qy + cy;
            const std::int64_t x0 = static_cast<std::int64_t>(std::floor(sx));
            const std::int64_t y0 = static_cast<std::int64_t>(std::floor(sy));
            const float fx = static_cast<float>(sx - x0);
            const float fy = static_cast<float>(sy - y0);
            if (x0 < -1 || x0 >= W || y0 < -1 || y0 >= H) continue;  // fully outside, keep 0
            const bool x0_in = x0 >= 0, x1_in = x0 + 1 < W;
            const bool y0_in = y0 >= 0, y1_in = y0 + 1 < H;
            for (std::int64_t c = 0; c < C; ++c) {
                const float* p = src.data() + c * plane;
                const float v00 = (x0_in && y0_in) ? p[y0 * W + x0] : 0.0f;
                const float v01 = (x1_in && y0_in) ? p[y0 * W + x0 + 1] : 0.0f;
                const float v10 = (x0_in && y1_in) ? p[(y0 + 1) * W + x0] : 0.0f;
                const float v11 = (x1_in && y1_in) ? p[(y0 + 1) * W + x0 + 1] : 0.0f;
                const float top = v00 * (1.0f - fx) + v01 * fx;
                const float bot = v10 * (1.0f - fx) + v11 * fx;
                dst[c * plane + y * W + x] = top * (1.0f - fy) + bot * fy;
            }
        }
    }
    return out;
}

Tensor<float> augment(const Tensor<float>& chw, const AugmentSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (!spec.enabled) return chw;
    return augment(chw, sample_augment_params(spec, seed));
}

}  // namespace rbrnet
