#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rbrnet/blocks.hpp"
#include "rbrnet/layers.hpp"

namespace rbrnet {

struct SpatialBlockSpec {
    std::int64_t filters = 32;
    std::int64_t kernel = 3;
    PoolSpec pool{PoolKind::avg, 2, 2};
};

struct ResidualBlockSpec {
    std::int64_t filters = 128;
    std::optional<PoolSpec> downsample;
};

struct FcSpec {
    std::int64_t width = 256;
    double dropout_rate = 0.5;
};

enum class HeadPool { global_avg, flatten };

/// Architecture description: three spatial blocks, four residual blocks, a
/// head pool and an FC stack ending in the class logits.
struct ResBRNetConfig {
    std::int64_t in_channels = 1;
    std::int64_t in_height = 227;
    std::int64_t in_width = 227;
    std::vector<SpatialBlockSpec> spatial_blocks;
    std::vector<ResidualBlockSpec> residual_blocks;
    std::vector<FcSpec> fc;
    std::int64_t num_classes = 4;
    HeadPool head_pool = HeadPool::global_avg;

    /// Full-size network: spatial filters 32/64/128 with avg/max/avg 2x2
    /// pools, residual filters 128/128/256/256 with max-pool downsamples
    /// after the second and fourth block, then GAP -> 256-wide FC with
    /// dropout 0.5 -> logits.
    static ResBRNetConfig canonical() {
        ResBRNetConfig cfg;
        cfg.spatial_blocks = {
            {32, 3, {PoolKind::avg, 2, 2}},
            {64, 3, {PoolKind::max, 2, 2}},
            {128, 3, {PoolKind::avg, 2, 2}},
        };
        cfg.residual_blocks = {
            {128, std::nullopt},
            {128, PoolSpec{PoolKind::max, 2, 2}},
            {256, std::nullopt},
            {256, PoolSpec{PoolKind::max, 2, 2}},
        };
        cfg.fc = {{256, 0.5}};
        return cfg;
    }

    /// Small configuration for fast CPU runs and tests: 64x64 input,
    /// spatial filters 8/16/32, residual filters 32/32/64/64.
    static ResBRNetConfig desk() {
        ResBRNetConfig cfg;
        cfg.in_height = 64;
        cfg.in_width = 64;
        cfg.spatial_blocks = {
            {8, 3, {PoolKind::avg, 2, 2}},
            {16, 3, {PoolKind::max, 2, 2}},
            {32, 3, {PoolKind::avg, 2, 2}},
        };
        cfg.residual_blocks = {
            {32, std::nullopt},
            {32, PoolSpec{PoolKind::max, 2, 2}},
            {64, std::nullopt},
            {64, PoolSpec{PoolKind::max, 2, 2}},
        };
        cfg.fc = {{64, 0.0}};
        return cfg;
    }

    void validate() const {
        if (in_channels < 1 || in_height < 1 || in_width < 1) {
            throw ValueError("config: input dims must be positive");
        }
        if (spatial_blocks.size() != 3) {
            throw ValueError("config: expected exactly 3 spatial blocks, got " +
                             std::to_string(spatial_blocks.size()));
        }
        if (residual_blocks.size() != 4) {
            throw ValueError("config: expected exactly 4 residual blocks, got " +
                             std::to_string(residual_blocks.size()));
        }
        if (num_classes < 2) throw ValueError("config: num_classes must be >= 2");
        for (const auto& s : spatial_blocks) {
            if (s.filters < 1 || s.kernel < 1) throw ValueError("config: bad spatial block");
            if (s.pool.window < 1 || s.pool.stride < 1) throw ValueError("config: bad pool spec");
        }
        for (const auto& r : residual_blocks) {
            if (r.filters < 1) throw ValueError("config: bad residual block");
        }
        for (const auto& f : fc) {
            if (f.width < 1) throw ValueError("config: bad fc width");
            if (f.dropout_rate < 0.0 || f.dropout_rate >= 1.0) {
                throw ValueError("config: dropout rate must lie in [0, 1)");
            }
        }
    }
};

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
};

/// The assembled network. Parameters are He-initialized from a seed with one
/// RNG stream per tensor, so equal seeds give bit-identical models.
template <typename T>
class ResBRNet {
  public:
    static ResBRNet build(const ResBRNetConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        ResBRNet model;
        model.cfg_ = cfg;
        std::uint64_t stream = 0;

        std::int64_t ch = cfg.in_channels;
        std::int64_t h = cfg.in_height, w = cfg.in_width;
        for (const auto& spec : cfg.spatial_blocks) {
            model.spatial_.push_back(
                SpatialBlock<T>::init(ch, spec.filters, spec.kernel, spec.pool, seed, stream));
            ch = spec.filters;
            check_pool(h, w, spec.pool);
            h = pooled(h, spec.pool);
            w = pooled(w, spec.pool);
        }
        for (const auto& spec : cfg.residual_blocks) {
            model.residual_.push_back(
                ResidualBlock<T>::init(ch, spec.filters, 3, spec.downsample, seed, stream));
            ch = spec.filters;
            if (spec.downsample) {
                check_pool(h, w, *spec.downsample);
                h = pooled(h, *spec.downsample);
                w = pooled(w, *spec.downsample);
            }
        }
        std::int64_t features = cfg.head_pool == HeadPool::global_avg ? ch : ch * h * w;
        for (const auto& spec : cfg.fc) {
            model.fc_.push_back(DenseLayer<T>::he_init(features, spec.width, seed, stream++));
            features = spec.width;
        }
        model.head_ = DenseLayer<T>::he_init(features, cfg.num_classes, seed, stream++);
        model.feature_width_ = features;
        for (auto& p : model.named_tensors()) {
            if (p.trainable) p.tensor.set_requires_grad(true);
        }
        return model;
    }

    /// Forward to logits [B x num_classes]. `seed` feeds the dropout masks
    /// (train mode only). If `features_out` is non-null it receives the
    /// penultimate activations [B x feature_width] (input to the class head).
    Tensor<T> forward(Tape<T>* tape, const Tensor<T>& batch, Mode mode, std::uint64_t seed = 0,
                      Tensor<T>* features_out = nullptr) {
        if (batch.ndim() != 4 || batch.dim(1) != cfg_.in_channels ||
            batch.dim(2) != cfg_.in_height || batch.dim(3) != cfg_.in_width) {
            throw ShapeError("forward: batch shape " + shape_str(batch.shape()) +
                             " does not match configured input [B x " +
                             std::to_string(cfg_.in_channels) + " x " +
                             std::to_string(cfg_.in_height) + " x " +
                             std::to_string(cfg_.in_width) + "]");
        }
        Tensor<T> x = batch;
        for (auto& block : spatial_) x = block.forward(tape, x, mode);
        for (auto& block : residual_) x = block.forward(tape, x, mode);
        if (cfg_.head_pool == HeadPool::global_avg) {
            x = global_avg_pool(tape, x);
        } else {
            x = x.reshape({x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)});
        }
        std::uint64_t layer_ix = 0;
        for (std::size_t i = 0; i < fc_.size(); ++i) {
            x = relu(tape, dense(tape, x, fc_[i]));
            const double rate = cfg_.fc[i].dropout_rate;
            if (rate > 0.0) x = dropout(tape, x, rate, mode, mix_seed(seed, ++layer_ix));
        }
        if (features_out != nullptr) *features_out = x;
        return dense(tape, x, head_);
    }

    /// Every tensor the model owns, in a stable order. Trainable entries are
    /// the optimizer's working set; the rest (batchnorm running stats) are
    /// state that still belongs in a checkpoint.
    std::vector<NamedTensor<T>> named_tensors() {
        std::vector<NamedTensor<T>> out;
        auto add_conv = [&](const std::string& prefix, Conv2DLayer<T>& c) {
            out.push_back({prefix + ".weight", c.weights, true});
            out.push_back({prefix + ".bias", c.bias, true});
        };
        auto add_bn = [&](const std::string& prefix, BatchNormLayer<T>& bn) {
            out.push_back({prefix + ".gamma", bn.gamma, true});
            out.push_back({prefix + ".beta", bn.beta, true});
            out.push_back({prefix + ".running_mean", bn.running_mean, false});
            out.push_back({prefix + ".running_var", bn.running_var, false});
        };
        for (std::size_t i = 0; i < spatial_.size(); ++i) {
            const std::string p = "spatial" + std::to_string(i + 1);
            add_conv(p + ".conv", spatial_[i].conv);
            add_bn(p + ".bn", spatial_[i].bn);
        }
        for (std::size_t i = 0; i < residual_.size(); ++i) {
            const std::string p = "res" + std::to_string(i + 1);
            add_conv(p + ".conv1", residual_[i].conv1);
            add_bn(p + ".bn1", residual_[i].bn1);
            add_conv(p + ".conv2", residual_[i].conv2);
            add_bn(p + ".bn2", residual_[i].bn2);
            if (residual_[i].has_projection) {
                add_conv(p + ".proj", residual_[i].proj);
                add_bn(p + ".proj_bn", residual_[i].proj_bn);
            }
        }
        for (std::size_t i = 0; i < fc_.size(); ++i) {
            const std::string p = "fc" + std::to_string(i + 1);
            out.push_back({p + ".weight", fc_[i].weights, true});
            out.push_back({p + ".bias", fc_[i].bias, true});
        }
        out.push_back({"head.weight", head_.weights, true});
        out.push_back({"head.bias", head_.bias, true});
        return out;
    }

    void zero_grad() {
        for (auto& p : named_tensors()) p.tensor.zero_grad();
    }

    const ResBRNetConfig& config() const { return cfg_; }
    std::int64_t feature_width() const { return feature_width_; }

    std::vector<SpatialBlock<T>>& spatial_blocks() { return spatial_; }
    std::vector<ResidualBlock<T>>& residual_blocks() { return residual_; }

  private:
    static std::int64_t pooled(std::int64_t dim, const PoolSpec& p) {
        return (dim - p.window) / p.stride + 1;
    }
    static void check_pool(std::int64_t h, std::int64_t w, const PoolSpec& p) {
        if (p.window > h || p.window > w) {
            throw ValueError("config: pool window " + std::to_string(p.window) +
                             " exceeds feature map " + std::to_string(h) + "x" + std::to_string(w));
        }
    }

    ResBRNetConfig cfg_;
    std::vector<SpatialBlock<T>> spatial_;
    std::vector<ResidualBlock<T>> residual_;
    std::vector<DenseLayer<T>> fc_;
    DenseLayer<T> head_;
    std::int64_t feature_width_ = 0;
};

using Model = ResBRNet<float>;

}  // namespace rbrnet
