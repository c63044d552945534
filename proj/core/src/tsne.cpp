#include "rbrnet/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "rbrnet/errors.hpp"
#include "rbrnet/rng.hpp"
#include "rbrnet/threading.hpp"

namespace rbrnet {

namespace {

constexpr double kTinyProb = 1e-12;

/// Conditional distribution p_{j|i} for one point at inverse bandwidth beta;
/// returns the achieved perplexity exp(H). Exponents are shifted by the
/// nearest-neighbor distance so the partition sum never underflows (the shift
/// cancels in the normalization and leaves the entropy unchanged).
double conditional_row(const std::vector<double>& sqdist, std::int64_t n, std::int64_t i,
                       double beta, double* row) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < n; ++j) {
        if (j != i) dmin = std::min(dmin, sqdist[i * n + j]);
    }
    double z = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * (sqdist[i * n + j] - dmin));
        z += row[j];
    }
    double expected_shifted = 0.0;
    const double inv_z = 1.0 / z;
    for (std::int64_t j = 0; j < n; ++j) {
        row[j] *= inv_z;
        if (j != i) expected_shifted += row[j] * (sqdist[i * n + j] - dmin);
    }
    const double h = std::log(z) + beta * expected_shifted;  // entropy in nats
    return std::exp(h);
}

}  // namespace

TsneAffinities tsne_affinities(const FeatureMatrix& features, double perplexity) {
    const std::int64_t n = features.n;
    const std::int64_t d = features.d;
    if (perplexity <= 0.0) throw ValueError("tsne: perplexity must be positive");
    if (static_cast<double>(n) < 3.0 * perplexity) {
        throw ValueError("tsne: perplexity " + std::to_string(perplexity) + " too large for " +
                         std::to_string(n) + " points (need n >= 3*perplexity)");
    }
    for (double v : features.values) {
        if (!std::isfinite(v)) throw ValueError("tsne: non-finite feature value");
    }

    // Pairwise squared Euclidean distances.
    std::vector<double> sqdist(static_cast<std::size_t>(n * n), 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::int64_t j = 0; j < n; ++j) {
                double acc = 0.0;
                const double* a = features.values.data() + i * d;
                const double* b = features.values.data() + static_cast<std::size_t>(j) * d;
                for (std::int64_t k = 0; k < d; ++k) {
                    const double diff = a[k] - b[k];
                    acc += diff * diff;
                }
                sqdist[i * n + j] = acc;
            }
        }
    });

    // Per-point bandwidth search: bisect beta until exp(H) hits the target
    // perplexity within 1e-5 (at most 50 bisection steps after bracketing).
    std::vector<double> p_cond(static_cast<std::size_t>(n * n), 0.0);
    std::vector<double> achieved(static_cast<std::size_t>(n), 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double beta = 1.0;
            double beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
            double* row = p_cond.data() + i * n;
            double perp = conditional_row(sqdist, n, static_cast<std::int64_t>(i), beta, row);
            for (int step = 0; step < 50 && std::abs(perp - perplexity) > 1e-5; ++step) {
                if (perp > perplexity) {
                    beta_lo = beta;  // too flat: sharpen
                    beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta_lo + beta_hi);
                } else {
                    beta_hi = beta;
                    beta = beta_lo == 0.0 ? beta * 0.5 : 0.5 * (beta_lo + beta_hi);
                }
                perp = conditional_row(sqdist, n, static_cast<std::int64_t>(i), beta, row);
            }
            achieved[i] = perp;
        }
    });

    // Symmetrize: p_ij = (p_{j|i} + p_{i|j}) / 2n; sums to 1 over all pairs.
    TsneAffinities result;
    result.achieved_perplexity = std::move(achieved);
    result.p.assign(static_cast<std::size_t>(n * n), 0.0);
    const double inv_2n = 1.0 / (2.0 * static_cast<double>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            result.p[i * n + j] = (p_cond[i * n + j] + p_cond[j * n + i]) * inv_2n;
        }
    }
    return result;
}

TsneResult tsne(const FeatureMatrix& features, const TsneConfig& cfg) {
    const std::int64_t n = features.n;
    if (cfg.iterations < 1) throw ValueError("tsne: iterations must be >= 1");
    TsneAffinities affinities = tsne_affinities(features, cfg.perplexity);
    std::vector<double>& p = affinities.p;

    // Init coords ~ normal(0, sd 1e-4), counter-based from the seed.
    std::vector<double> y(static_cast<std::size_t>(n * 2));
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = 1e-4 * rng_normal(cfg.seed, 0x75e3u, i);
    }
    std::vector<double> velocity(static_cast<std::size_t>(n * 2), 0.0);
    std::vector<double> qnum(static_cast<std::size_t>(n * n), 0.0);
    std::vector<double> grad(static_cast<std::size_t>(n * 2), 0.0);

    TsneResult result;
    result.achieved_perplexity = affinities.achieved_perplexity;

    const double exaggeration = cfg.early_exaggeration;
    auto kl_divergence = [&](double z) {
        double kl = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double pij = std::max(p[i * n + j], kTinyProb);
                const double qij = std::max(qnum[i * n + j] / z, kTinyProb);
                kl += pij * std::log(pij / qij);
            }
        }
        return kl;
    };

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const bool exaggerated = iter < cfg.exaggeration_iters;

        // Student-t numerators; Z summed single-threaded so the result does
        // not depend on the worker count.
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double yi0 = y[i * 2], yi1 = y[i * 2 + 1];
                for (std::int64_t j = 0; j < n; ++j) {
                    const double d0 = yi0 - y[j * 2];
                    const double d1 = yi1 - y[j * 2 + 1];
                    qnum[i * n + j] =
                        static_cast<std::int64_t>(i) == j ? 0.0 : 1.0 / (1.0 + d0 * d0 + d1 * d1);
                }
            }
        });
        double z = 0.0;
        for (double v : qnum) z += v;

        if (iter == cfg.exaggeration_iters) {
            result.kl_post_exaggeration = kl_divergence(z);
        }

        const double p_scale = exaggerated ? exaggeration : 1.0;
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                double g0 = 0.0, g1 = 0.0;
                const double yi0 = y[i * 2], yi1 = y[i * 2 + 1];
                for (std::int64_t j = 0; j < n; ++j) {
                    if (static_cast<std::int64_t>(i) == j) continue;
                    const double q = qnum[i * n + j];
                    const double coeff = (p_scale * p[i * n + j] - q / z) * q;
                    g0 += coeff * (yi0 - y[j * 2]);
                    g1 += coeff * (yi1 - y[j * 2 + 1]);
                }
                grad[i * 2] = 4.0 * g0;
                grad[i * 2 + 1] = 4.0 * g1;
            }
        });

        const double momentum =
            iter < cfg.momentum_switch_iter ? cfg.momentum_early : cfg.momentum_late;
        double mean0 = 0.0, mean1 = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            velocity[i * 2] = momentum * velocity[i * 2] - cfg.learning_rate * grad[i * 2];
            velocity[i * 2 + 1] =
                momentum * velocity[i * 2 + 1] - cfg.learning_rate * grad[i * 2 + 1];
            y[i * 2] += velocity[i * 2];
            y[i * 2 + 1] += velocity[i * 2 + 1];
            mean0 += y[i * 2];
            mean1 += y[i * 2 + 1];
        }
        mean0 /= static_cast<double>(n);
        mean1 /= static_cast<double>(n);
        for (std::int64_t i = 0; i < n; ++i) {
            y[i * 2] -= mean0;
            y[i * 2 + 1] -= mean1;
        }
    }

    // Final KL against the true (un-exaggerated) P.
    {
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double yi0 = y[i * 2], yi1 = y[i * 2 + 1];
                for (std::int64_t j = 0; j < n; ++j) {
                    const double d0 = yi0 - y[j * 2];
                    const double d1 = yi1 - y[j * 2 + 1];
                    qnum[i * n + j] =
                        static_cast<std::int64_t>(i) == j ? 0.0 : 1.0 / (1.0 + d0 * d0 + d1 * d1);
                }
            }
        });
        double z = 0.0;
        for (double v : qnum) z += v;
        result.kl_final = kl_divergence(z);
    }

    result.coords = std::move(y);
    return result;
}

FeatureMatrix extract_features(Model& model, const LabeledDataset& ds) {
    if (ds.samples.empty()) throw DataError("extract_features: dataset is empty");
    FeatureMatrix fm;
    fm.n = static_cast<std::int64_t>(ds.samples.size());
    fm.d = model.feature_width();
    fm.values.resize(static_cast<std::size_t>(fm.n * fm.d));
    fm.labels.resize(ds.samples.size());

    const std::int64_t chunk = 64;
    const std::size_t sample_sz = static_cast<std::size_t>(ds.channels * ds.height * ds.width);
    for (std::int64_t begin = 0; begin < fm.n; begin += chunk) {
        const std::int64_t b = std::min(chunk, fm.n - begin);
        Tensor<float> batch = Tensor<float>::zeros({b, ds.channels, ds.height, ds.width});
        float* out = batch.data().data();
        for (std::int64_t i = 0; i < b; ++i) {
            const Sample& s = ds.samples[static_cast<std::size_t>(begin + i)];
            std::memcpy(out + static_cast<std::size_t>(i) * sample_sz, s.image.data().data(),
                        sample_sz * sizeof(float));
            fm.labels[static_cast<std::size_t>(begin + i)] = s.label;
        }
        Tensor<float> feats;
        model.forward(nullptr, batch, Mode::infer, 0, &feats);
        auto fd = feats.data();
        for (std::int64_t i = 0; i < b; ++i) {
            for (std::int64_t k = 0; k < fm.d; ++k) {
                fm.values[static_cast<std::size_t>((begin + i) * fm.d + k)] =
                    static_cast<double>(fd[i * fm.d + k]);
            }
        }
    }
    return fm;
}

}  // namespace rbrnet
