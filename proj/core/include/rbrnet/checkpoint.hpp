#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rbrnet/dataset.hpp"
#include "rbrnet/model.hpp"

namespace rbrnet {

/// Sidecar metadata stored next to the binary container as `<file>.json`.
struct CheckpointMeta {
    ResBRNetConfig config;
    std::vector<std::string> class_names;
    int epochs_run = 0;
    double final_lr = 0.0;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    double val_fraction_of_train = 0.1;
    int best_epoch = -1;
    double best_val_acc = 0.0;
};

/// Write the model (parameters and batchnorm running stats) to a binary
/// container plus a JSON sidecar. The container is little-endian with a
/// trailing CRC32, so a round trip reproduces every tensor bit-exactly.
void save_checkpoint(Model& model, const CheckpointMeta& meta, const std::string& path);

struct LoadedCheckpoint {
    Model model;
    CheckpointMeta meta;
};

/// Rebuild the model from the sidecar config and fill it from the container.
/// Verifies magic, version, CRC, and shape agreement; failures raise
/// CheckpointError with the corresponding kind.
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Content hash of an image tree (relative paths + bytes), used to detect
/// stale caches. Independent of file timestamps.
std::uint64_t dataset_tree_hash(const std::string& root_dir);

/// Persist a decoded dataset in the container format (one tensor per image
/// plus a label tensor); the sidecar records class names, source paths, the
/// target shape and the source tree hash.
void save_dataset_cache(const LabeledDataset& ds, const std::string& path,
                        std::uint64_t source_hash);

/// Load a cache if it is present, intact, and its recorded hash matches;
/// returns nullopt (after a stderr note when corrupt) otherwise.
std::optional<LabeledDataset> load_dataset_cache(const std::string& path,
                                                 std::uint64_t expected_hash);

}  // namespace rbrnet
