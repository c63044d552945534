#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbrnet/image.hpp"

namespace rbrnet {

/// Four-class synthetic head-scan stand-ins: per class a distinct bright
/// structure (disc / ring / none / cross) over a noisy gradient background,
/// with seeded jitter in position, size and intensity.
std::vector<std::string> synthetic_class_names();

Image synthetic_image(int class_index, std::int64_t size, std::uint64_t seed);

/// Write root/<class>/img_NNN.png for every class; returns image count.
/// Deterministic in seed.
int write_synthetic_tree(const std::string& root_dir, int images_per_class, std::int64_t size,
                         std::uint64_t seed);

}  // namespace rbrnet
