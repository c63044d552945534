#include <benchmark/benchmark.h>

#include <random>

#include "rbrnet/augment.hpp"
#include "rbrnet/gemm.hpp"
#include "rbrnet/layers.hpp"
#include "rbrnet/model.hpp"
#include "rbrnet/tsne.hpp"

using namespace rbrnet;

namespace {

Tensor<float> random_input(const Shape& shape, std::uint64_t seed) {
    return Tensor<float>::he_normal(shape, 16, seed);
}

void bm_gemm(benchmark::State& state) {
    const std::int64_t n = state.range(0);
    std::vector<float> a(n * n, 1.0f), b(n * n, 0.5f), c(n * n);
    for (auto _ : state) {
        detail::gemm_nn<float>(n, n, n, a.data(), b.data(), c.data(), false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(bm_gemm)->Arg(64)->Arg(128)->Arg(256);

void bm_conv2d_forward(benchmark::State& state) {
    const std::int64_t ch = state.range(0);
    auto x = random_input({8, ch, 32, 32}, 1);
    auto layer = Conv2DLayer<float>::he_init(ch, ch, 3, 3, Padding::same, 7, 0);
    for (auto _ : state) {
        auto out = conv2d<float>(nullptr, x, layer);
        benchmark::DoNotOptimize(out.data().data());
    }
}
BENCHMARK(bm_conv2d_forward)->Arg(8)->Arg(32)->Arg(64);

void bm_conv2d_train_step(benchmark::State& state) {
    auto x = random_input({8, 16, 32, 32}, 2);
    auto layer = Conv2DLayer<float>::he_init(16, 16, 3, 3, Padding::same, 9, 0);
    layer.weights.set_requires_grad(true);
    layer.bias.set_requires_grad(true);
    for (auto _ : state) {
        Tape<float> tape;
        layer.weights.zero_grad();
        layer.bias.zero_grad();
        auto loss = sum(&tape, conv2d(&tape, x, layer));
        tape.backward(loss);
        benchmark::DoNotOptimize(layer.weights.grad().data());
    }
}
BENCHMARK(bm_conv2d_train_step);

void bm_pool2d(benchmark::State& state) {
    auto x = random_input({8, 32, 32, 32}, 3);
    const PoolSpec spec{state.range(0) == 0 ? PoolKind::avg : PoolKind::max, 2, 2};
    for (auto _ : state) {
        auto out = pool2d<float>(nullptr, x, spec);
        benchmark::DoNotOptimize(out.data().data());
    }
}
BENCHMARK(bm_pool2d)->Arg(0)->Arg(1);

void bm_batchnorm_train(benchmark::State& state) {
    auto x = random_input({16, 32, 16, 16}, 4);
    auto bn = BatchNormLayer<float>::init(32);
    for (auto _ : state) {
        auto out = batchnorm<float>(nullptr, x, bn, Mode::train);
        benchmark::DoNotOptimize(out.data().data());
    }
}
BENCHMARK(bm_batchnorm_train);

void bm_model_forward_desk(benchmark::State& state) {
    auto model = Model::build(ResBRNetConfig::desk(), 5);
    auto batch = random_input({16, 1, 64, 64}, 6);
    for (auto _ : state) {
        auto logits = model.forward(nullptr, batch, Mode::infer);
        benchmark::DoNotOptimize(logits.data().data());
    }
}
BENCHMARK(bm_model_forward_desk);

void bm_augment(benchmark::State& state) {
    auto img = random_input({1, 227, 227}, 7);
    AugmentSpec spec;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto out = augment(img, spec, seed++);
        benchmark::DoNotOptimize(out.data().data());
    }
}
BENCHMARK(bm_augment);

void bm_tsne_affinities(benchmark::State& state) {
    const std::int64_t n = state.range(0);
    std::mt19937 gen(11);
    std::normal_distribution<double> dist(0.0, 1.0);
    FeatureMatrix fm;
    fm.n = n;
    fm.d = 64;
    fm.values.resize(static_cast<std::size_t>(n * 64));
    fm.labels.assign(static_cast<std::size_t>(n), 0);
    for (auto& v : fm.values) v = dist(gen);
    for (auto _ : state) {
        auto aff = tsne_affinities(fm, 30.0);
        benchmark::DoNotOptimize(aff.p.data());
    }
}
BENCHMARK(bm_tsne_affinities)->Arg(200)->Arg(500);

}  // namespace

BENCHMARK_MAIN();
