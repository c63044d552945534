#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbrnet/tensor.hpp"

namespace rbrnet {

/// Interleaved float image, values in [0, 1], layout [H][W][C], C = 1 or 3.
struct Image {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::int64_t channels = 0;
    std::vector<float> pixels;

    float at(std::int64_t y, std::int64_t x, std::int64_t c) const {
        return pixels[(y * width + x) * channels + c];
    }
    float& at(std::int64_t y, std::int64_t x, std::int64_t c) {
        return pixels[(y * width + x) * channels + c];
    }
};

/// Decode a PNG or JPEG file (sniffed from magic bytes). Grayscale files come
/// back with 1 channel, everything else as RGB. Throws DataError on missing
/// or undecodable files.
Image decode_image(const std::string& path);

/// 8-bit PNG writer (gray or RGB depending on img.channels).
void encode_png(const std::string& path, const Image& img);

/// 8-bit JPEG writer.
void encode_jpeg(const std::string& path, const Image& img, int quality = 95);

/// BT.601 luminance: Y = 0.299 R + 0.587 G + 0.114 B. Identity on gray input.
Image to_luminance(const Image& img);

/// Replicate a gray image to 3 channels; identity on RGB input.
Image to_rgb(const Image& img);

/// Bilinear resample with corner-aligned coordinates: output pixel (y, x)
/// samples the source at (y*(H-1)/(H'-1), x*(W-1)/(W'-1)), so equal sizes are
/// an exact identity. A size-1 output axis samples the source center.
Image resize_bilinear(const Image& img, std::int64_t out_h, std::int64_t out_w);

/// Planar [C x H x W] tensor from an interleaved image.
Tensor<float> image_to_tensor(const Image& img);

/// Interleaved image from a planar [C x H x W] tensor (values clamped to [0,1]).
Image tensor_to_image(const Tensor<float>& chw);

}  // namespace rbrnet
