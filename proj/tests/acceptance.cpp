// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run via ctest (test name "acceptance") or directly:
//   ./tests/acceptance
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "rbrnet/blocks.hpp"
#include "rbrnet/checkpoint.hpp"
#include "rbrnet/grad_check.hpp"
#include "rbrnet/metrics.hpp"
#include "rbrnet/optim.hpp"
#include "rbrnet/synthetic.hpp"
#include "rbrnet/tsne.hpp"
#include "test_helpers.hpp"

using namespace rbrnet;
using rbrnet::testing::TempDir;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw Failure(msg);
}

/// Redirect stdout into a scratch file for the lifetime of the guard, so
/// in-process CLI runs don't interleave with the per-criterion report lines.
class StdoutSilencer {
  public:
    explicit StdoutSilencer(const std::string& sink) {
        std::fflush(stdout);
        saved_ = dup(fileno(stdout));
        FILE* f = freopen(sink.c_str(), "w", stdout);
        (void)f;
    }
    ~StdoutSilencer() {
        std::fflush(stdout);
        dup2(saved_, fileno(stdout));
        close(saved_);
    }

  private:
    int saved_ = -1;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness, 64-bit, every layer, >= 5 random instances, < 60 s
//
// Random instances keep every ReLU input and max-pool window gap at least
// 1e-3 away from the kink (resampling until the margin holds), since central
// differences are meaningless across a kink.
// ---------------------------------------------------------------------------
double min_abs(const Tensor<double>& t) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : t.data()) m = std::min(m, std::abs(v));
    return m;
}

bool maxpool_gap_ok(const Tensor<double>& x, std::int64_t t, std::int64_t stride, double margin) {
    const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    auto xd = x.data();
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
        for (std::int64_t h0 = 0; h0 + t <= H; h0 += stride) {
            for (std::int64_t w0 = 0; w0 + t <= W; w0 += stride) {
                double best = -std::numeric_limits<double>::infinity(), second = best;
                for (std::int64_t u = 0; u < t; ++u) {
                    for (std::int64_t v = 0; v < t; ++v) {
                        const double val = xd[bc * H * W + (h0 + u) * W + (w0 + v)];
                        if (val > best) {
                            second = best;
                            best = val;
                        } else if (val > second) {
                            second = val;
                        }
                    }
                }
                if (best - second < margin) return false;
            }
        }
    }
    return true;
}

bool spatial_margin_ok(SpatialBlock<double> blk, const Tensor<double>& x, double margin) {
    auto pre = batchnorm<double>(nullptr, conv2d<double>(nullptr, x, blk.conv), blk.bn,
                                 Mode::train);
    if (min_abs(pre) < margin) return false;
    if (blk.pool.kind == PoolKind::max) {
        return maxpool_gap_ok(relu<double>(nullptr, pre), blk.pool.window, blk.pool.stride,
                              margin);
    }
    return true;
}

bool residual_margin_ok(ResidualBlock<double> blk, const Tensor<double>& x, double margin) {
    auto h1 = batchnorm<double>(nullptr, conv2d<double>(nullptr, x, blk.conv1), blk.bn1,
                                Mode::train);
    if (min_abs(h1) < margin) return false;
    auto h = relu<double>(nullptr, h1);
    auto h2 = batchnorm<double>(nullptr, conv2d<double>(nullptr, h, blk.conv2), blk.bn2,
                                Mode::train);
    Tensor<double> skip = x;
    if (blk.has_projection) {
        skip = batchnorm<double>(nullptr, conv2d<double>(nullptr, x, blk.proj), blk.proj_bn,
                                 Mode::train);
    }
    return min_abs(add<double>(nullptr, h2, skip)) >= margin;
}

template <typename Ok>
Tensor<double> draw_with_margin(std::mt19937& gen, const Shape& shape, const Ok& ok) {
    for (int attempt = 0; attempt < 500; ++attempt) {
        auto x = testing::random_tensor<double>(shape, gen);
        if (ok(x)) return x;
    }
    throw Failure("could not draw a kink-free instance in 500 attempts");
}

/// Through batchnorm graphs, individual input gradients can nearly cancel;
/// the per-element relative error is then dominated by the ~1e-10 absolute
/// noise floor of central differences. Testing at 1e-6 is only meaningful on
/// instances whose smallest gradient component stays above a fraction of the
/// gradient RMS, so such draws are rejected alongside kink-adjacent ones.
template <typename F>
bool well_conditioned(const F& f, const Tensor<double>& x, double floor_ratio = 4e-3) {
    Tensor<double> xa = x.clone();
    xa.set_requires_grad(true);
    Tape<double> tape;
    Tensor<double> loss = f(&tape, xa);
    tape.backward(loss);
    double rms = 0.0;
    double smallest = std::numeric_limits<double>::infinity();
    for (double g : xa.grad()) {
        rms += g * g;
        smallest = std::min(smallest, std::abs(g));
    }
    rms = std::sqrt(rms / static_cast<double>(xa.numel()));
    return rms > 0.0 && smallest >= floor_ratio * rms;
}

std::string criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937 gen(2024);
    constexpr double kMargin = 1e-3;
    double worst = 0.0;
    auto check = [&](const char* what, double err) {
        worst = std::max(worst, err);
        require(err < 1e-6, std::string(what) + " grad error " + fmt(err) + " >= 1e-6");
    };

    for (int inst = 0; inst < 5; ++inst) {
        // conv2d, same and valid
        auto x = testing::random_tensor<double>({2, 2, 6, 6}, gen);
        auto w = testing::random_tensor<double>({3, 2, 3, 3}, gen);
        auto b = testing::random_tensor<double>({3}, gen);
        for (Padding pad : {Padding::same, Padding::valid}) {
            Conv2DLayer<double> conv;
            conv.weights = w;
            conv.bias = b;
            conv.padding = pad;
            check("conv2d(x)", grad_check<double>(
                                   [&](Tape<double>* t, Tensor<double>& v) {
                                       return sum(t, conv2d(t, v, conv));
                                   },
                                   x));
            check("conv2d(w)", grad_check<double>(
                                   [&](Tape<double>* t, Tensor<double>& v) {
                                       Conv2DLayer<double> c2;
                                       c2.weights = v;
                                       c2.bias = b;
                                       c2.padding = pad;
                                       return sum(t, conv2d(t, x, c2));
                                   },
                                   w));
        }

        // both pools, window gaps bounded away from ties
        auto xp = draw_with_margin(gen, {2, 2, 6, 6}, [&](const Tensor<double>& cand) {
            return maxpool_gap_ok(cand, 2, 2, kMargin);
        });
        for (PoolKind kind : {PoolKind::max, PoolKind::avg}) {
            check("pool2d", grad_check<double>(
                                [kind](Tape<double>* t, Tensor<double>& v) {
                                    return sum(t, pool2d(t, v, {kind, 2, 2}));
                                },
                                xp));
        }

        // batchnorm train mode, elementwise-weighted loss
        auto c = testing::random_tensor<double>({2, 2, 6, 6}, gen);
        auto gamma = testing::random_tensor<double>({2}, gen, 0.5, 1.5);
        auto bn_loss = [&](Tape<double>* t, Tensor<double>& v) {
            auto bn = BatchNormLayer<double>::init(2);
            bn.gamma = gamma;
            return sum(t, mul(t, batchnorm(t, v, bn, Mode::train), c));
        };
        auto xb = draw_with_margin(gen, {2, 2, 6, 6}, [&](const Tensor<double>& cand) {
            return well_conditioned(bn_loss, cand);
        });
        check("batchnorm", grad_check<double>(bn_loss, xb));

        // dense
        auto xd = testing::random_tensor<double>({3, 5}, gen);
        auto wd = testing::random_tensor<double>({5, 4}, gen);
        auto bd = testing::random_tensor<double>({4}, gen);
        check("dense", grad_check<double>(
                           [&](Tape<double>* t, Tensor<double>& v) {
                               DenseLayer<double> d;
                               d.weights = wd;
                               d.bias = bd;
                               auto h = dense(t, v, d);
                               return sum(t, mul(t, h, h));
                           },
                           xd));

        // dropout-off (rate 0 in train mode)
        check("dropout-off", grad_check<double>(
                                 [](Tape<double>* t, Tensor<double>& v) {
                                     return sum(t, dropout(t, v, 0.0, Mode::train, 3));
                                 },
                                 xd));

        // softmax cross-entropy
        auto logits = testing::random_tensor<double>({4, 4}, gen);
        check("softmax-ce", grad_check<double>(
                                [](Tape<double>* t, Tensor<double>& v) {
                                    return softmax_cross_entropy(t, v, {0, 1, 2, 3}).loss;
                                },
                                logits));

        // spatial block
        std::uint64_t stream = 0;
        auto sblock = SpatialBlock<double>::init(2, 3, 3, {PoolKind::avg, 2, 2},
                                                 1000 + inst, stream);
        auto spatial_loss = [&](Tape<double>* t, Tensor<double>& v) {
            return sum(t, sblock.forward(t, v, Mode::train));
        };
        auto xs = draw_with_margin(gen, {2, 2, 6, 6}, [&](const Tensor<double>& cand) {
            return spatial_margin_ok(sblock, cand, kMargin) && well_conditioned(spatial_loss, cand);
        });
        check("spatial-block", grad_check<double>(spatial_loss, xs));

        // residual block without projection
        std::uint64_t stream2 = 0;
        auto rsame = ResidualBlock<double>::init(2, 2, 3, std::nullopt, 2000 + inst, stream2);
        auto rsame_loss = [&](Tape<double>* t, Tensor<double>& v) {
            return sum(t, rsame.forward(t, v, Mode::train));
        };
        auto xr = draw_with_margin(gen, {2, 2, 6, 6}, [&](const Tensor<double>& cand) {
            return residual_margin_ok(rsame, cand, kMargin) && well_conditioned(rsame_loss, cand);
        });
        check("residual-block", grad_check<double>(rsame_loss, xr));

        // residual block with projection
        std::uint64_t stream3 = 0;
        auto rproj = ResidualBlock<double>::init(2, 4, 3, std::nullopt, 3000 + inst, stream3);
        require(rproj.has_projection, "projection path expected");
        auto rproj_loss = [&](Tape<double>* t, Tensor<double>& v) {
            return sum(t, rproj.forward(t, v, Mode::train));
        };
        auto xq = draw_with_margin(gen, {2, 2, 6, 6}, [&](const Tensor<double>& cand) {
            return residual_margin_ok(rproj, cand, kMargin) && well_conditioned(rproj_loss, cand);
        });
        check("residual-block-proj", grad_check<double>(rproj_loss, xq));
    }
    const double elapsed = seconds_since(t0);
    require(elapsed < 60.0, "gradient suite took " + fmt(elapsed) + " s >= 60 s");
    return "max rel-err " + fmt(worst) + ", " + fmt(elapsed) + " s";
}

// ---------------------------------------------------------------------------
// 2. Fast conv/pool match direct nested-loop oracles, 100 cases, 1e-5 rel
// ---------------------------------------------------------------------------
std::string criterion_oracles() {
    std::mt19937 gen(7);
    std::uniform_int_distribution<int> bdist(1, 2), cdist(1, 3), fdist(1, 4), hw(4, 16),
        kdist(1, 3), sdist(1, 2), coin(0, 1), tdist(2, 3);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::int64_t B = bdist(gen), C = cdist(gen), F = fdist(gen);
        const std::int64_t H = hw(gen), W = hw(gen), K = kdist(gen);
        const bool same = coin(gen) == 1;
        const std::int64_t stride = same ? 1 : sdist(gen);
        auto x = testing::random_tensor<float>({B, C, H, W}, gen);
        auto w = testing::random_tensor<float>({F, C, K, K}, gen);
        auto b = testing::random_tensor<float>({F}, gen);
        Conv2DLayer<float> layer;
        layer.weights = w;
        layer.bias = b;
        layer.stride = stride;
        layer.padding = same ? Padding::same : Padding::valid;
        auto fast = conv2d<float>(nullptr, x, layer);
        auto ref = testing::conv2d_oracle<float>(x, w, b, stride, same);
        require(fast.shape() == ref.shape(), "conv shape mismatch");
        for (std::int64_t i = 0; i < fast.numel(); ++i) {
            const double rel = std::abs(fast.data()[i] - ref.data()[i]) /
                               std::max(1.0, std::abs(static_cast<double>(ref.data()[i])));
            worst = std::max(worst, rel);
            require(rel < 1e-5, "conv deviates from oracle by " + fmt(rel));
        }

        const std::int64_t t = tdist(gen);
        if (t <= std::min(H, W)) {
            const std::int64_t ps = sdist(gen);
            for (PoolKind kind : {PoolKind::max, PoolKind::avg}) {
                auto pf = pool2d<float>(nullptr, x, {kind, t, ps});
                auto pr = testing::pool2d_oracle<float>(x, kind, t, ps);
                require(pf.shape() == pr.shape(), "pool shape mismatch");
                for (std::int64_t i = 0; i < pf.numel(); ++i) {
                    const double rel = std::abs(pf.data()[i] - pr.data()[i]) /
                                       std::max(1.0, std::abs(static_cast<double>(pr.data()[i])));
                    worst = std::max(worst, rel);
                    require(rel < 1e-5, "pool deviates from oracle by " + fmt(rel));
                }
            }
        }
    }
    return "100 conv cases + pools, max rel dev " + fmt(worst);
}

// ---------------------------------------------------------------------------
// 3. Residual identity: zeroed residual path returns nonnegative input exactly
// ---------------------------------------------------------------------------
std::string criterion_residual_identity() {
    std::mt19937 gen(3);
    for (int trial = 0; trial < 10; ++trial) {
        std::uint64_t stream = 0;
        auto block = ResidualBlock<float>::init(3, 3, 3, std::nullopt, 40 + trial, stream);
        require(!block.has_projection, "identity case must not project");
        for (auto& v : block.conv1.weights.data()) v = 0.0f;
        for (auto& v : block.conv1.bias.data()) v = 0.0f;
        for (auto& v : block.conv2.weights.data()) v = 0.0f;
        for (auto& v : block.conv2.bias.data()) v = 0.0f;
        auto x = testing::random_tensor<float>({2, 3, 6, 6}, gen, 0.0f, 2.0f);
        auto out = block.forward(nullptr, x, Mode::train);
        require(out.shape() == x.shape(), "shape changed");
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            require(out.data()[i] == x.data()[i], "output differs from input at element " +
                                                      std::to_string(i));
        }
    }
    return "output == input bitwise on 10 random nonnegative inputs";
}

// ---------------------------------------------------------------------------
// 4. Overfit capability at desk scale, stock optimizer settings, < 10 min
// ---------------------------------------------------------------------------
double final_train_acc(const std::string& log_path) {
    std::ifstream in(log_path);
    require(in.good(), "missing train log " + log_path);
    std::string line, last;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    require(!last.empty(), "empty train log");
    std::stringstream ss(last);
    std::string field;
    for (int i = 0; i < 4; ++i) std::getline(ss, field, ',');
    return std::stod(field);
}

std::string criterion_overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    TempDir dir("accept_overfit");
    const std::string data = (dir.path() / "data").string();
    write_synthetic_tree(data, 20, 64, 1);

    auto train = [&](const char* name, const char* lr) {
        const std::string ckpt = (dir.path() / (std::string(name) + ".rbrn")).string();
        StdoutSilencer quiet((dir.path() / "stdout.txt").string());
        const int rc = cli::run({"train", "--data", data, "--out", ckpt, "--preset", "desk",
                                 "--epochs", "30", "--batch-size", "16", "--lr", lr, "--seed",
                                 "1", "--no-augment"});
        require(rc == 0, std::string("training run (") + name + ") exited " + std::to_string(rc));
        return ckpt;
    };

    const auto scaled = train("scaled", "1e-3");
    const double acc_scaled = final_train_acc(scaled + ".trainlog.csv");
    require(acc_scaled == 1.0,
            "scaled-lr run final train accuracy " + fmt(acc_scaled) + " != 100%");

    const auto unscaled = train("unscaled", "1e-4");
    const double acc_unscaled = final_train_acc(unscaled + ".trainlog.csv");
    require(acc_unscaled == 1.0, "1e-4 run final train accuracy " + fmt(acc_unscaled) + " != 100%");

    // overfit oracle: evaluating the memorized fixtures gives a perfect report
    const std::string report = (dir.path() / "report.json").string();
    {
        StdoutSilencer quiet((dir.path() / "stdout.txt").string());
        const int rc = cli::run({"eval", "--ckpt", scaled, "--data", data, "--all", "--report",
                                 report});
        require(rc == 0, "eval exited " + std::to_string(rc));
    }
    nlohmann::json doc;
    std::ifstream(report) >> doc;
    require(doc.at("accuracy_percent").get<double>() == 100.0,
            "eval on memorized fixtures not at 100%");
    require(doc.at("macro").at("roc_auc").get<double>() == 1.0, "macro ROC-AUC below 1");
    require(doc.at("macro").at("pr_auc").get<double>() == 1.0, "macro PR-AUC below 1");

    // a memorized image is predicted as its training label with prob > 0.99
    const std::string probe = data + "/normal/img_000.png";
    const std::string predict_out = (dir.path() / "predict.json").string();
    {
        StdoutSilencer quiet(predict_out);
        const int rc = cli::run({"predict", "--ckpt", scaled, "--image", probe});
        require(rc == 0, "predict exited " + std::to_string(rc));
    }
    nlohmann::json pred;
    std::ifstream(predict_out) >> pred;
    require(pred.at("class").get<std::string>() == "normal", "memorized image mislabeled");
    require(pred.at("probs").at("normal").get<double>() > 0.99,
            "memorized image prob " + fmt(pred.at("probs").at("normal").get<double>()) +
                " <= 0.99");

    const double elapsed = seconds_since(t0);
    require(elapsed < 600.0, "overfit criterion took " + fmt(elapsed) + " s >= 600 s");
    return "both lr settings reach 100% train acc within 30 epochs; eval/predict perfect on "
           "fixtures; " +
           fmt(elapsed) + " s";
}

// ---------------------------------------------------------------------------
// 5. RMSprop scalar oracle and lr schedule values
// ---------------------------------------------------------------------------
std::string criterion_rmsprop_schedule() {
    auto theta = TensorF::scalar(1.0f);
    theta.set_requires_grad(true);
    std::vector<NamedTensor<float>> params{{"theta", theta, true}};
    params[0].tensor.grad()[0] = 1.0f;
    auto state = RmsPropState<float>::init(params);
    rmsprop_step(params, state, 0.1f);
    const double got = params[0].tensor.data()[0];
    require(std::abs(got - 0.55279) <= 1e-4,
            "one rmsprop step gave " + fmt(got) + ", want 0.55279 +- 1e-4");

    LrSchedule sched;
    require(sched.at(0) == 1e-4, "lr(0) != 1e-4");
    require(sched.at(10) == 4e-5, "lr(10) != 4e-5");
    // binary doubles of 1e-4 and 0.4 sit ~1 ulp above their decimal values,
    // so the k>=2 products land 2 ulp from the decimal literals; 1e-15
    // relative is the attainable reading of "exactly" here.
    require(std::abs(sched.at(20) - 1.6e-5) / 1.6e-5 < 1e-15, "lr(20) != 1.6e-5");
    require(std::abs(sched.at(30) - 6.4e-6) / 6.4e-6 < 1e-15, "lr(30) != 6.4e-6");
    require(sched.at(9) == sched.at(0) && sched.at(19) == sched.at(10) &&
                sched.at(39) == sched.at(30),
            "schedule is not piecewise constant over 10-epoch periods");
    return "step -> " + fmt(got) + "; lr 1e-4/4e-5/1.6e-5/6.4e-6 at 0/10/20/30";
}

// ---------------------------------------------------------------------------
// 6. Metrics oracles
// ---------------------------------------------------------------------------
std::string criterion_metrics() {
    std::mt19937 gen(11);

    // scalar metrics vs hand formulas, exact division of integer counts
    std::uniform_int_distribution<int> kdist(2, 5), count(0, 40);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = kdist(gen);
        ConfusionMatrix cm;
        cm.counts.assign(k, std::vector<std::int64_t>(k, 0));
        std::int64_t total = 0;
        for (int t = 0; t < k; ++t) {
            for (int p = 0; p < k; ++p) {
                cm.counts[t][p] = count(gen);
                total += cm.counts[t][p];
            }
        }
        if (total == 0) {
            cm.counts[0][0] = 1;
            total = 1;
        }
        auto rep = scalar_metrics(cm);
        std::int64_t trace = 0;
        for (int c = 0; c < k; ++c) trace += cm.counts[c][c];
        require(rep.accuracy_percent ==
                    100.0 * static_cast<double>(trace) / static_cast<double>(total),
                "accuracy mismatch");
        for (int c = 0; c < k; ++c) {
            std::int64_t tp = cm.counts[c][c], fn = 0, fp = 0;
            for (int j = 0; j < k; ++j) {
                if (j == c) continue;
                fn += cm.counts[c][j];
                fp += cm.counts[j][c];
            }
            const std::int64_t tn = total - tp - fn - fp;
            const double sens = tp + fn == 0 ? 0.0
                                             : static_cast<double>(tp) /
                                                   static_cast<double>(tp + fn);
            const double prec = tp + fp == 0 ? 0.0
                                             : static_cast<double>(tp) /
                                                   static_cast<double>(tp + fp);
            const double spec = tn + fp == 0 ? 0.0
                                             : static_cast<double>(tn) /
                                                   static_cast<double>(tn + fp);
            const double f1 =
                prec + sens == 0.0 ? 0.0 : 2.0 * prec * sens / (prec + sens);
            require(rep.per_class[c].sensitivity == sens, "sensitivity mismatch");
            require(rep.per_class[c].precision == prec, "precision mismatch");
            require(rep.per_class[c].specificity == spec, "specificity mismatch");
            require(rep.per_class[c].f1 == f1, "f1 mismatch");
        }
    }

    // ROC sweep vs pairwise brute force, exact, sets of size <= 12
    std::uniform_int_distribution<int> ndist(2, 12), levels(1, 5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int tested = 0;
    while (tested < 200) {
        const int n = ndist(gen);
        std::vector<double> scores(n);
        std::vector<bool> positives(n);
        const int quant = levels(gen);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            scores[i] = std::floor(unif(gen) * quant) / quant;
            positives[i] = unif(gen) < 0.5;
            pos += positives[i] ? 1 : 0;
        }
        if (pos == 0 || pos == n) continue;
        ++tested;
        const double sweep = roc_curve(scores, positives).auc;
        const double brute = testing::roc_auc_bruteforce(scores, positives);
        require(sweep == brute, "ROC sweep " + fmt(sweep) + " != pairwise " + fmt(brute));
    }

    // softmax-CE at uniform K=4 logits
    auto res = softmax_cross_entropy<float>(nullptr, TensorF::zeros({1, 4}), {2});
    require(std::abs(res.loss.item() - std::log(4.0)) <= 1e-6,
            "uniform-logit loss " + fmt(res.loss.item()) + " != ln 4");

    return "20 matrices exact, 200 ROC sets exact, ln4 check";
}

// ---------------------------------------------------------------------------
// 7. Augmentation contracts
// ---------------------------------------------------------------------------
std::string criterion_augmentation() {
    std::mt19937 gen(13);
    // double reflection exact
    for (bool horizontal : {true, false}) {
        auto x = testing::random_tensor<float>({1, 11, 14}, gen, 0.0f, 1.0f);
        AugmentParams p;
        p.reflect_h = horizontal;
        p.reflect_v = !horizontal;
        auto twice = augment(augment(x, p), p);
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            require(twice.data()[i] == x.data()[i], "double reflection not exact");
        }
    }

    // forced 360-degree rotation within 1e-4 per pixel
    auto x = testing::random_tensor<float>({1, 16, 16}, gen, 0.0f, 1.0f);
    AugmentParams rot;
    rot.rotation_deg = 360.0;
    auto out = augment(x, rot);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        require(std::abs(out.data()[i] - x.data()[i]) < 1e-4f, "360-degree rotation deviates");
    }

    // sampled parameters inside the closed ranges over 1e5 draws
    AugmentSpec spec;
    for (std::uint64_t seed = 0; seed < 100000; ++seed) {
        const auto p = sample_augment_params(spec, seed);
        require(p.rotation_deg >= 0.0 && p.rotation_deg <= 360.0, "rotation out of range");
        require(p.scale >= 0.5 && p.scale <= 1.0, "scale out of range");
        require(p.shear >= -0.05 && p.shear <= 0.05, "shear out of range");
    }
    return "reflection involution exact, rotation within 1e-4, 1e5 draws in range";
}

// ---------------------------------------------------------------------------
// 8. t-SNE: perplexity hit, cluster separation, KL improvement
// ---------------------------------------------------------------------------
std::string criterion_tsne() {
    // bandwidth search accuracy on random features
    std::mt19937 gen(17);
    FeatureMatrix fm;
    fm.n = 120;
    fm.d = 10;
    fm.values.resize(static_cast<std::size_t>(fm.n * fm.d));
    fm.labels.assign(static_cast<std::size_t>(fm.n), 0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto& v : fm.values) v = noise(gen);
    auto aff = tsne_affinities(fm, 25.0);
    double worst = 0.0;
    for (double perp : aff.achieved_perplexity) {
        worst = std::max(worst, std::abs(perp - 25.0));
    }
    require(worst < 1e-3, "achieved perplexity off by " + fmt(worst));

    // two tight clusters, centers 100x the internal spread apart
    FeatureMatrix clusters;
    clusters.n = 120;
    clusters.d = 8;
    clusters.values.resize(static_cast<std::size_t>(clusters.n * clusters.d));
    clusters.labels.resize(static_cast<std::size_t>(clusters.n));
    for (std::int64_t i = 0; i < clusters.n; ++i) {
        const int label = i < 60 ? 0 : 1;
        clusters.labels[static_cast<std::size_t>(i)] = label;
        for (std::int64_t k = 0; k < clusters.d; ++k) {
            clusters.values[i * clusters.d + k] =
                noise(gen) + (label == 1 && k == 0 ? 100.0 : 0.0);
        }
    }
    TsneConfig cfg;
    cfg.seed = 5;
    auto result = tsne(clusters, cfg);

    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < clusters.n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::int64_t best_j = -1;
        for (std::int64_t j = 0; j < clusters.n; ++j) {
            if (j == i) continue;
            const double dx = result.coords[i * 2] - result.coords[j * 2];
            const double dy = result.coords[i * 2 + 1] - result.coords[j * 2 + 1];
            if (dx * dx + dy * dy < best) {
                best = dx * dx + dy * dy;
                best_j = j;
            }
        }
        hits += clusters.labels[static_cast<std::size_t>(i)] ==
                clusters.labels[static_cast<std::size_t>(best_j)];
    }
    const double knn = static_cast<double>(hits) / static_cast<double>(clusters.n);
    require(knn >= 0.95, "1-NN label agreement " + fmt(knn) + " < 0.95");
    require(result.kl_final < result.kl_post_exaggeration,
            "final KL " + fmt(result.kl_final) + " not below post-exaggeration KL " +
                fmt(result.kl_post_exaggeration));
    return "perplexity within " + fmt(worst) + ", 1-NN " + fmt(knn) + ", KL " +
           fmt(result.kl_post_exaggeration) + " -> " + fmt(result.kl_final);
}

// ---------------------------------------------------------------------------
// 9. Persistence: bit-exact round trip, corruption rejected
// ---------------------------------------------------------------------------
std::string criterion_persistence() {
    TempDir dir("accept_persist");
    auto model = Model::build(ResBRNetConfig::desk(), 77);
    auto batch = TensorF::he_normal({2, 1, 64, 64}, 64, 5);
    TapeF warm;
    model.forward(&warm, batch, Mode::train, 9);  // make running stats nontrivial
    auto before = model.forward(nullptr, batch, Mode::infer);

    CheckpointMeta meta;
    meta.config = ResBRNetConfig::desk();
    meta.class_names = synthetic_class_names();
    meta.seed = 77;
    const std::string path = (dir.path() / "m.rbrn").string();
    save_checkpoint(model, meta, path);
    auto loaded = load_checkpoint(path);
    auto after = loaded.model.forward(nullptr, batch, Mode::infer);
    for (std::int64_t i = 0; i < before.numel(); ++i) {
        require(before.data()[i] == after.data()[i], "logits differ after round trip");
    }

    // corruption cases must raise CheckpointError, never crash
    auto corrupt = [&](auto mutate, CheckpointError::Kind want, const char* what) {
        const std::string bad_path = (dir.path() / "bad.rbrn").string();
        save_checkpoint(model, meta, bad_path);
        std::vector<char> bytes;
        {
            std::ifstream in(bad_path, std::ios::binary);
            bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        }
        mutate(bytes);
        std::ofstream(bad_path, std::ios::binary | std::ios::trunc)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        try {
            load_checkpoint(bad_path);
            throw Failure(std::string(what) + ": corruption not detected");
        } catch (const CheckpointError& e) {
            require(e.kind() == want, std::string(what) + ": wrong error kind");
        }
    };
    corrupt([](std::vector<char>& b) { b[b.size() / 2] ^= 0x42; }, CheckpointError::Kind::BadCrc,
            "bit flip");
    corrupt([](std::vector<char>& b) { b.resize(b.size() / 2); }, CheckpointError::Kind::BadCrc,
            "truncation");
    corrupt([](std::vector<char>& b) { b[1] = 'z'; }, CheckpointError::Kind::BadMagic,
            "magic");
    return "bit-exact logits after round trip; 3 corruption classes rejected";
}

// ---------------------------------------------------------------------------
// 10. End-to-end determinism of full train runs
// ---------------------------------------------------------------------------
std::string criterion_determinism() {
    TempDir dir("accept_determinism");
    const std::string data = (dir.path() / "data").string();
    write_synthetic_tree(data, 8, 64, 9);

    auto run = [&](const char* name) {
        const std::string ckpt = (dir.path() / (std::string(name) + ".rbrn")).string();
        StdoutSilencer quiet((dir.path() / "stdout.txt").string());
        const int rc = cli::run({"train", "--data", data, "--out", ckpt, "--preset", "desk",
                                 "--epochs", "3", "--batch-size", "16", "--seed", "123"});
        require(rc == 0, "training run exited " + std::to_string(rc));
        return ckpt;
    };
    const auto a = run("a");
    const auto b = run("b");
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::vector<char>(std::istreambuf_iterator<char>(in),
                                 std::istreambuf_iterator<char>());
    };
    require(!slurp(a).empty(), "empty checkpoint");
    require(slurp(a) == slurp(b), "checkpoints differ between identical runs");
    require(slurp(a + ".trainlog.csv") == slurp(b + ".trainlog.csv"),
            "train logs differ between identical runs");
    require(slurp(a + ".json") == slurp(b + ".json"), "sidecars differ between identical runs");
    return "two augmented 3-epoch runs byte-identical (checkpoint, log, sidecar)";
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<std::string()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient correctness (64-bit, all layers)", criterion_gradients},
        {2, "conv/pool oracle equivalence", criterion_oracles},
        {3, "residual identity with zero residual path", criterion_residual_identity},
        {4, "overfit capability at desk scale", criterion_overfit},
        {5, "rmsprop scalar oracle and lr schedule", criterion_rmsprop_schedule},
        {6, "metrics oracles", criterion_metrics},
        {7, "augmentation contracts", criterion_augmentation},
        {8, "t-sne perplexity, clusters, KL", criterion_tsne},
        {9, "checkpoint persistence and corruption", criterion_persistence},
        {10, "end-to-end training determinism", criterion_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        try {
            const std::string detail = c.run();
            std::printf("[PASS] criterion %2d: %s — %s\n", c.id, c.name, detail.c_str());
        } catch (const std::exception& e) {
            ++failures;
            std::printf("[FAIL] criterion %2d: %s — %s\n", c.id, c.name, e.what());
        }
        std::fflush(stdout);
    }
    if (failures == 0) {
        std::printf("acceptance: all %zu criteria passed\n", criteria.size());
    } else {
        std::printf("acceptance: %d of %zu criteria FAILED\n", failures, criteria.size());
    }
    return failures == 0 ? 0 : 1;
}
