#pragma once

#include <cstdint>
#include <vector>

#include "rbrnet/dataset.hpp"
#include "rbrnet/model.hpp"

namespace rbrnet {

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double momentum_early = 0.5;  // before the switch iteration
    double momentum_late = 0.8;
    int momentum_switch_iter = 250;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    std::uint64_t seed = 0;
};

/// n x d row-major feature rows with one label per row.
struct FeatureMatrix {
    std::int64_t n = 0;
    std::int64_t d = 0;
    std::vector<double> values;
    std::vector<int> labels;

    double at(std::int64_t row, std::int64_t col) const { return values[row * d + col]; }
};

struct TsneResult {
    std::vector<double> coords;  // n x 2 row-major, mean-centered
    std::vector<double> achieved_perplexity;  // per input point
    double kl_post_exaggeration = 0.0;  // KL against true P once exaggeration lifts
    double kl_final = 0.0;
};

/// Symmetrized high-dimensional affinities p_ij = (p_{j|i} + p_{i|j}) / 2n,
/// with per-point Gaussian bandwidths bisected to the target perplexity.
struct TsneAffinities {
    std::vector<double> p;  // n x n, symmetric, zero diagonal, sums to 1
    std::vector<double> achieved_perplexity;
};

TsneAffinities tsne_affinities(const FeatureMatrix& features, double perplexity);

/// Exact O(n^2) t-SNE: per-point Gaussian bandwidths found by bisection to
/// hit the target perplexity, symmetrized affinities, Student-t low-dim
/// kernel, gradient descent with momentum and early exaggeration.
/// Deterministic in cfg.seed.
TsneResult tsne(const FeatureMatrix& features, const TsneConfig& cfg);

/// Run the model over the dataset in infer mode and capture the activations
/// feeding the final classifier (one row per sample, in dataset order).
FeatureMatrix extract_features(Model& model, const LabeledDataset& ds);

}  // namespace rbrnet
