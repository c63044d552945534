#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbrnet/augment.hpp"
#include "rbrnet/tensor.hpp"

namespace rbrnet {

struct Sample {
    Tensor<float> image;  // [C x H x W], values in [0, 1]
    int label = 0;
    std::string path;  // source file, for provenance
};

struct LabeledDataset {
    std::vector<Sample> samples;
    std::vector<std::string> class_names;  // sorted lexicographically
    std::int64_t channels = 0, height = 0, width = 0;

    std::size_t size() const { return samples.size(); }
};

struct IngestTarget {
    std::int64_t channels = 1;
    std::int64_t height = 227;
    std::int64_t width = 227;
};

/// Load a directory-per-class tree: root/<class_name>/*.{png,jpg,jpeg}.
/// Classes are indexed by sorted subdirectory name; files are visited in
/// lexicographic path order, so two ingests of the same tree are identical.
/// Images are converted to luminance (channels == 1) or RGB (channels == 3)
/// and bilinearly resized to height x width. Undecodable files are skipped
/// with a warning on stderr; a class with no usable image is an error.
LabeledDataset ingest(const std::string& root_dir, const IngestTarget& target = {});

struct SplitSpec {
    double train_fraction = 0.8;
    double val_fraction_of_train = 0.1;
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct SplitResult {
    LabeledDataset train, val, test;
};

/// Stratified shuffled partition. Per class, the test set takes
/// round((1 - train_fraction) * count) samples (half-up), the validation set
/// round(val_fraction_of_train * remaining), and the rest train. Disjoint,
/// exhaustive, deterministic in the seed.
SplitResult split(const LabeledDataset& ds, const SplitSpec& spec);

struct Batch {
    Tensor<float> images;  // [B x C x H x W]
    std::vector<int> labels;
    std::vector<std::size_t> indices;  // dataset sample indices, batch order
};

/// Deterministic epoch iteration: the sample order is a pure function of
/// (seed, epoch), the last partial batch is kept, and when augmenting, each
/// sample's transform is drawn from (seed, epoch, sample_index) so it is
/// reproducible but fresh every epoch.
class BatchStream {
  public:
    BatchStream(const LabeledDataset& ds, std::int64_t batch_size, std::int64_t epoch,
                std::uint64_t seed, const AugmentSpec* aug = nullptr);

    std::int64_t batch_count() const;
    Batch get(std::int64_t batch_index) const;

  private:
    const LabeledDataset* ds_;
    std::int64_t batch_size_;
    std::int64_t epoch_;
    std::uint64_t seed_;
    const AugmentSpec* aug_;
    std::vector<std::size_t> order_;
};

}  // namespace rbrnet
