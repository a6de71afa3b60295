// Microbenchmarks for the hot kernels: pairwise losses, mask construction,
// k-means mining, the temporal encoder, and the segmental metrics.

#include <benchmark/benchmark.h>

#include "contraseg/contrast.hpp"
#include "contraseg/metrics.hpp"
#include "contraseg/models.hpp"
#include "contraseg/rng.hpp"

using namespace contraseg;

namespace {

contrast::SampledBatch<double> make_batch(int rows, int dim, uint64_t seed) {
    Rng rng(seed);
    contrast::SampledBatch<double> b;
    b.inputs = MatD(rows, dim);
    b.temporal = MatD(rows, dim);
    b.semantic = MatD(rows, dim);
    for (auto* m : {&b.inputs, &b.temporal, &b.semantic})
        for (auto& x : m->v) x = rng.normal() / std::sqrt(static_cast<double>(dim));
    for (int r = 0; r < rows; ++r) b.provenance.emplace_back(0, r);
    return b;
}

contrast::PairMask random_mask(int n, uint64_t seed) {
    Rng rng(seed);
    contrast::PairMask m(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const uint8_t v = rng.uniform() < 0.5 ? 1 : 0;
            m.at(i, j) = v;
            m.at(j, i) = v;
        }
    return m;
}

void BM_SmcLossGrad(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    auto batch = make_batch(rows, 64, 1);
    auto mask = random_mask(rows, 2);
    MatD dh, dx;
    for (auto _ : state) {
        auto out = contrast::multilevel_loss_grad(batch, mask, 1.0, {}, dh, dx);
        benchmark::DoNotOptimize(out.total);
    }
}
BENCHMARK(BM_SmcLossGrad)->Arg(120)->Arg(240);

void BM_DynamicMask(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    auto batch = make_batch(rows, 32, 3);
    for (auto _ : state) {
        Rng rng(7);
        auto mask = contrast::dynamic_mask(batch, 6, rng);
        benchmark::DoNotOptimize(mask.count());
    }
}
BENCHMARK(BM_DynamicMask)->Arg(120)->Arg(240);

void BM_Kmeans(benchmark::State& state) {
    Rng data_rng(5);
    MatD points(static_cast<int>(state.range(0)), 32);
    for (auto& x : points.v) x = data_rng.normal();
    for (auto _ : state) {
        Rng rng(11);
        auto assign = contrast::kmeans(points, 6, rng);
        benchmark::DoNotOptimize(assign.inertia);
    }
}
BENCHMARK(BM_Kmeans)->Arg(120)->Arg(480);

void BM_TemporalForwardBackward(benchmark::State& state) {
    ExperimentConfig cfg;
    cfg.feature_dim = 16;
    cfg.embedding_dim = 32;
    cfg.encoder_hidden = 32;
    cfg.downsample_length = static_cast<int>(state.range(0));
    nn::TemporalEncoder<double> enc;
    enc.init(cfg, Rng(1));
    Rng rng(2);
    Tensor3<double> v(4, cfg.downsample_length, cfg.feature_dim);
    for (auto& x : v.v) x = rng.normal();
    for (auto _ : state) {
        Tensor3<double> x = enc.forward(v, true);
        Tensor3<double> dx = enc.backward(x);
        benchmark::DoNotOptimize(dx.v.data());
    }
}
BENCHMARK(BM_TemporalForwardBackward)->Arg(64)->Arg(128);

void BM_EditScore(benchmark::State& state) {
    Rng rng(9);
    std::vector<int> pred, gt;
    for (int i = 0; i < 5000; ++i) {
        pred.push_back(static_cast<int>(rng.uniform_int(0, 5)));
        gt.push_back(static_cast<int>(rng.uniform_int(0, 5)));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::edit_score(pred, gt));
        benchmark::DoNotOptimize(metrics::f1_at_overlap(pred, gt, 0.25));
    }
}
BENCHMARK(BM_EditScore);

}  // namespace

BENCHMARK_MAIN();
