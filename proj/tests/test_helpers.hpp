#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "rbrnet/layers.hpp"
#include "rbrnet/tensor.hpp"

namespace rbrnet::testing {

/// Direct nested-loop convolution, independent of the im2col path:
/// out[f](m, n) = sum_c sum_u sum_v in[c](m*stride+u-pad, n*stride+v-pad) * k[f][c](u, v) + bias[f].
template <typename T>
Tensor<T> conv2d_oracle(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias,
                        std::int64_t stride, bool same_pad) {
    const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t F = weights.dim(0), R = weights.dim(2), S = weights.dim(3);
    const std::int64_t pad_top = same_pad ? (R - 1) / 2 : 0;
    const std::int64_t pad_left = same_pad ? (S - 1) / 2 : 0;
    const std::int64_t Ho = same_pad ? H : (H - R) / stride + 1;
    const std::int64_t Wo = same_pad ? W : (W - S) / stride + 1;
    Tensor<T> out = Tensor<T>::zeros({B, F, Ho, Wo});
    auto xd = x.data();
    auto wd = weights.data();
    auto bd = bias.data();
    auto od = out.data();
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t f = 0; f < F; ++f) {
            for (std::int64_t m = 0; m < Ho; ++m) {
                for (std::int64_t n = 0; n < Wo; ++n) {
                    T acc = bd[f];
                    for (std::int64_t c = 0; c < C; ++c) {
                        for (std::int64_t u = 0; u < R; ++u) {
                            for (std::int64_t v = 0; v < S; ++v) {
                                const std::int64_t ih = m * stride + u - pad_top;
                                const std::int64_t iw = n * stride + v - pad_left;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += xd[((b * C + c) * H + ih) * W + iw] *
                                       wd[((f * C + c) * R + u) * S + v];
                            }
                        }
                    }
                    od[((b * F + f) * Ho + m) * Wo + n] = acc;
                }
            }
        }
    }
    return out;
}

/// Exhaustive window pooling oracle.
template <typename T>
Tensor<T> pool2d_oracle(const Tensor<T>& x, PoolKind kind, std::int64_t t, std::int64_t stride) {
    const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t Ho = (H - t) / stride + 1, Wo = (W - t) / stride + 1;
    Tensor<T> out = Tensor<T>::zeros({B, C, Ho, Wo});
    auto xd = x.data();
    auto od = out.data();
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
        for (std::int64_t m = 0; m < Ho; ++m) {
            for (std::int64_t n = 0; n < Wo; ++n) {
                T best = xd[bc * H * W + (m * stride) * W + n * stride];
                T acc = T(0);
                for (std::int64_t u = 0; u < t; ++u) {
                    for (std::int64_t v = 0; v < t; ++v) {
                        const T val = xd[bc * H * W + (m * stride + u) * W + (n * stride + v)];
                        best = std::max(best, val);
                        acc += val;
                    }
                }
                od[bc * Ho * Wo + m * Wo + n] =
                    kind == PoolKind::max ? best : acc / static_cast<T>(t * t);
            }
        }
    }
    return out;
}

/// Pairwise Mann-Whitney ROC-AUC: fraction of correctly ordered
/// positive-negative pairs with half credit for ties. Computed with the same
/// integer-numerator/denominator arithmetic the sweep uses, so exact
/// agreement is a bitwise check.
inline double roc_auc_bruteforce(const std::vector<double>& scores,
                                 const std::vector<bool>& positives) {
    std::int64_t num = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positives[i]) continue;
        ++pos;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positives[j]) continue;
            if (scores[i] > scores[j]) {
                num += 2;
            } else if (scores[i] == scores[j]) {
                num += 1;
            }
        }
    }
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (!positives[j]) ++neg;
    }
    return static_cast<double>(num) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

/// PR-AUC by brute-force threshold enumeration: walk distinct scores
/// descending, add delta-recall * precision at each threshold.
inline double pr_auc_bruteforce(std::vector<double> scores, const std::vector<bool>& positives) {
    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::int64_t pos = 0;
    for (bool p : positives) pos += p ? 1 : 0;
    double auc = 0.0, prev_recall = 0.0;
    for (double th : thresholds) {
        std::int64_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= th) {
                if (positives[i]) {
                    ++tp;
                } else {
                    ++fp;
                }
            }
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return auc;
}

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::mt19937& gen, T lo = T(-1), T hi = T(1)) {
    std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
    Tensor<T> t = Tensor<T>::zeros(shape);
    for (auto& v : t.data()) v = static_cast<T>(dist(gen));
    return t;
}

/// Unique scratch directory; removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("rbrnet_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

  private:
    std::filesystem::path path_;
};

}  // namespace rbrnet::testing
