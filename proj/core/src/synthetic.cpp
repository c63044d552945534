#include "rbrnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "rbrnet/errors.hpp"
#include "rbrnet/rng.hpp"

namespace fs = std::filesystem;

namespace rbrnet {

std::vector<std::string> synthetic_class_names() {
    return {"glioma_tumor", "meningioma_tumor", "normal", "pituitary_tumor"};
}

Image synthetic_image(int class_index, std::int64_t size, std::uint64_t seed) {
    if (class_index < 0 || class_index > 3) throw ValueError("synthetic_image: class in [0, 4)");
    if (size < 16) throw ValueError("synthetic_image: size must be >= 16");

    Image img;
    img.width = size;
    img.height = size;
    img.channels = 1;
    img.pixels.assign(static_cast<std::size_t>(size * size), 0.0f);

    const double s = static_cast<double>(size);
    const double cx = s / 2.0 + (rng_uniform(seed, 1, 0) - 0.5) * s * 0.2;
    const double cy = s / 2.0 + (rng_uniform(seed, 1, 1) - 0.5) * s * 0.2;
    const double radius = s * (0.12 + 0.08 * rng_uniform(seed, 1, 2));
    const double bright = 0.75 + 0.2 * rng_uniform(seed, 1, 3);
    const double grad = 0.1 + 0.1 * rng_uniform(seed, 1, 4);

    for (std::int64_t y = 0; y < size; ++y) {
        for (std::int64_t x = 0; x < size; ++x) {
            // skull-ish ellipse of soft tissue over black background
            const double nx = (x - s / 2.0) / (s / 2.0);
            const double ny = (y - s / 2.0) / (s / 2.0);
            const double rr = nx * nx + ny * ny;
            double v = 0.0;
            if (rr < 0.9) {
                v = 0.25 + grad * (static_cast<double>(y) / s);
                v += 0.04 * (rng_uniform(seed, 2, static_cast<std::uint64_t>(y * size + x)) - 0.5);
            }
            const double dx = x - cx, dy = y - cy;
            const double dist = std::sqrt(dx * dx + dy * dy);
            switch (class_index) {
                case 0:  // filled disc
                    if (dist < radius) v = bright;
                    break;
                case 1:  // ring
                    if (dist > radius * 0.75 && dist < radius * 1.15) v = bright;
                    break;
                case 2:  // no lesion
                    break;
                case 3:  // cross
                    if ((std::abs(dx) < radius * 0.22 && std::abs(dy) < radius * 1.2) ||
                        (std::abs(dy) < radius * 0.22 && std::abs(dx) < radius * 1.2)) {
                        v = bright;
                    }
                    break;
                default:
                    break;
            }
            img.pixels[y * size + x] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
        }
    }
    return img;
}

int write_synthetic_tree(const std::string& root_dir, int images_per_class, std::int64_t size,
                         std::uint64_t seed) {
    if (images_per_class < 1) throw ValueError("write_synthetic_tree: need >= 1 image per class");
    const auto names = synthetic_class_names();
    int written = 0;
    for (std::size_t k = 0; k < names.size(); ++k) {
        const fs::path dir = fs::path(root_dir) / names[k];
        fs::create_directories(dir);
        for (int i = 0; i < images_per_class; ++i) {
            char file[32];
            std::snprintf(file, sizeof(file), "img_%03d.png", i);
            const std::uint64_t img_seed = mix_seed(seed, k * 100000ULL + static_cast<std::uint64_t>(i));
            encode_png((dir / file).string(), synthetic_image(static_cast<int>(k), size, img_seed));
            ++written;
        }
    }
    return written;
}

}  // namespace rbrnet
