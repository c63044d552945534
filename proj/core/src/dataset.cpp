#include "rbrnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>

#include "rbrnet/errors.hpp"
#include "rbrnet/image.hpp"
#include "rbrnet/rng.hpp"
#include "rbrnet/threading.hpp"

namespace fs = std::filesystem;

namespace rbrnet {

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& indices) {
    LabeledDataset out;
    out.class_names = ds.class_names;
    out.channels = ds.channels;
    out.height = ds.height;
    out.width = ds.width;
    out.samples.reserve(indices.size());
    for (std::size_t ix : indices) out.samples.push_back(ds.samples[ix]);
    return out;
}

}  // namespace

LabeledDataset ingest(const std::string& root_dir, const IngestTarget& target) {
    if (target.channels != 1 && target.channels != 3) {
        throw ValueError("ingest: target channels must be 1 or 3");
    }
    if (!fs::is_directory(root_dir)) {
        throw DataError("ingest: not a directory: " + root_dir);
    }
    std::vector<std::string> class_names;
    for (const auto& entry : fs::directory_iterator(root_dir)) {
        if (entry.is_directory()) class_names.push_back(entry.path().filename().string());
    }
    if (class_names.empty()) {
        throw DataError("ingest: no class subdirectories under " + root_dir);
    }
    std::sort(class_names.begin(), class_names.end());

    LabeledDataset ds;
    ds.class_names = class_names;
    ds.channels = target.channels;
    ds.height = target.height;
    ds.width = target.width;

    struct PendingFile {
        std::string path;
        int label;
    };
    std::vector<PendingFile> files;
    for (std::size_t k = 0; k < class_names.size(); ++k) {
        std::vector<std::string> paths;
        for (const auto& entry : fs::directory_iterator(fs::path(root_dir) / class_names[k])) {
            if (entry.is_regular_file() && has_image_extension(entry.path())) {
                paths.push_back(entry.path().string());
            }
        }
        if (paths.empty()) {
            throw DataError("ingest: class '" + class_names[k] + "' has no images");
        }
        std::sort(paths.begin(), paths.end());
        for (auto& p : paths) files.push_back({std::move(p), static_cast<int>(k)});
    }

    // Decode in parallel; slot order keeps the result independent of scheduling.
    std::vector<Sample> decoded(files.size());
    std::vector<char> ok(files.size(), 0);
    parallel_for(files.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            try {
                Image img = decode_image(files[i].path);
                img = target.channels == 1 ? to_luminance(img) : to_rgb(img);
                img = resize_bilinear(img, target.height, target.width);
                decoded[i] = Sample{image_to_tensor(img), files[i].label, files[i].path};
                ok[i] = 1;
            } catch (const DataError&) {
                ok[i] = 0;
            }
        }
    });

    std::vector<std::int64_t> per_class(class_names.size(), 0);
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!ok[i]) {
            std::cerr << "ingest: skipping undecodable file " << files[i].path << "\n";
            continue;
        }
        per_class[static_cast<std::size_t>(files[i].label)]++;
        ds.samples.push_back(std::move(decoded[i]));
    }
    for (std::size_t k = 0; k < class_names.size(); ++k) {
        if (per_class[k] == 0) {
            throw DataError("ingest: class '" + class_names[k] + "' has no decodable images");
        }
    }
    return ds;
}

SplitResult split(const LabeledDataset& ds, const SplitSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
        throw ValueError("split: train_fraction must lie in (0, 1)");
    }
    if (spec.val_fraction_of_train < 0.0 || spec.val_fraction_of_train >= 1.0) {
        throw ValueError("split: val_fraction_of_train must lie in [0, 1)");
    }
    const std::size_t k = ds.class_names.size();
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const int label = ds.samples[i].label;
        if (label < 0 || static_cast<std::size_t>(label) >= k) {
            throw DataError("split: sample label " + std::to_string(label) + " out of range");
        }
        by_class[static_cast<std::size_t>(label)].push_back(i);
    }

    std::vector<std::size_t> train_ix, val_ix, test_ix;
    for (std::size_t c = 0; c < k; ++c) {
        auto& members = by_class[c];
        if (spec.stratified && members.size() < 3) {
            throw DataError("split: class '" + ds.class_names[c] + "' has only " +
                            std::to_string(members.size()) + " samples, need >= 3");
        }
        // Per-class Fisher-Yates from a class-specific stream.
        const std::uint64_t stream = 0x5917u + c;
        for (std::size_t i = members.size(); i > 1; --i) {
            const std::size_t j =
                static_cast<std::size_t>(rng_below(spec.seed, stream, i, i));
            std::swap(members[i - 1], members[j]);
        }
        const std::int64_t n = static_cast<std::int64_t>(members.size());
        const std::int64_t n_test = round_half_up((1.0 - spec.train_fraction) * n);
        const std::int64_t n_val = round_half_up(spec.val_fraction_of_train * (n - n_test));
        for (std::int64_t i = 0; i < n; ++i) {
            if (i < n_test) {
                test_ix.push_back(members[i]);
            } else if (i < n_test + n_val) {
                val_ix.push_back(members[i]);
            } else {
                train_ix.push_back(members[i]);
            }
        }
    }
    std::sort(train_ix.begin(), train_ix.end());
    std::sort(val_ix.begin(), val_ix.end());
    std::sort(test_ix.begin(), test_ix.end());
    return {subset(ds, train_ix), subset(ds, val_ix), subset(ds, test_ix)};
}

BatchStream::BatchStream(const LabeledDataset& ds, std::int64_t batch_size, std::int64_t epoch,
                         std::uint64_t seed, const AugmentSpec* aug)
    : ds_(&ds), batch_size_(batch_size), epoch_(epoch), seed_(seed), aug_(aug) {
    if (batch_size < 1) throw ValueError("batches: batch_size must be >= 1");
    if (ds.samples.empty()) throw DataError("batches: dataset is empty");
    order_.resize(ds.samples.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    const std::uint64_t shuffle_seed = mix_seed(seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order_.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng_below(shuffle_seed, 0xba7c4u, i, i));
        std::swap(order_[i - 1], order_[j]);
    }
}

std::int64_t BatchStream::batch_count() const {
    const std::int64_t n = static_cast<std::int64_t>(order_.size());
    return (n + batch_size_ - 1) / batch_size_;
}

Batch BatchStream::get(std::int64_t batch_index) const {
    if (batch_index < 0 || batch_index >= batch_count()) {
        throw ValueError("batches: batch index out of range");
    }
    const std::size_t begin = static_cast<std::size_t>(batch_index * batch_size_);
    const std::size_t end =
        std::min(order_.size(), begin + static_cast<std::size_t>(batch_size_));
    const std::int64_t b = static_cast<std::int64_t>(end - begin);

    Batch batch;
    batch.images = Tensor<float>::zeros({b, ds_->channels, ds_->height, ds_->width});
    batch.labels.resize(static_cast<std::size_t>(b));
    batch.indices.assign(order_.begin() + begin, order_.begin() + end);

    const std::size_t sample_sz =
        static_cast<std::size_t>(ds_->channels * ds_->height * ds_->width);
    float* out = batch.images.data().data();
    const std::uint64_t epoch_seed = mix_seed(seed_, static_cast<std::uint64_t>(epoch_));
    parallel_for(static_cast<std::size_t>(b), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const std::size_t sample_ix = batch.indices[i];
            const Sample& s = ds_->samples[sample_ix];
            Tensor<float> img = s.image;
            if (aug_ != nullptr && aug_->enabled) {
                img = augment(img, *aug_, mix_seed(epoch_seed, sample_ix));
            }
            std::memcpy(out + i * sample_sz, img.data().data(), sample_sz * sizeof(float));
        }
    });
    for (std::size_t i = 0; i < static_cast<std::size_t>(b); ++i) {
        batch.labels[i] = ds_->samples[batch.indices[i]].label;
    }
    return batch;
}

}  // namespace rbrnet
