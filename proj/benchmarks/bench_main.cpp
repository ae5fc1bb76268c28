#include <benchmark/benchmark.h>

#include "bridgekit/data.hpp"
#include "bridgekit/forward.hpp"
#include "bridgekit/metrics.hpp"
#include "bridgekit/posterior.hpp"
#include "bridgekit/training.hpp"

using namespace bridgekit;

namespace {

void BM_BuildSchedule(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(build_schedule({T, 2.2, Variant::SelfRDB}));
}
BENCHMARK(BM_BuildSchedule)->Arg(32)->Arg(1000);

void BM_PosteriorSample(benchmark::State& state) {
    const ScheduleTable table = build_schedule({32, 2.2, Variant::SelfRDB});
    const auto ds = make_synthetic_pairs(Task::Shapes16, 64, 1);
    const TensorBatch x_t = sample_marginal(ds.x0, ds.y, 16, table, Noise(2));
    std::uint64_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(posterior_sample(x_t, ds.y, ds.x0, 16, table, Noise(3).fork(k++)));
    }
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_PosteriorSample);

void BM_GeneratorForward(benchmark::State& state) {
    NetConfig nc;
    nc.kind = state.range(0) == 0 ? NetKind::Mlp : NetKind::TinyUnet;
    const Task task = nc.kind == NetKind::Mlp ? Task::Gauss2Gauss : Task::Shapes16;
    const auto ds = make_synthetic_pairs(task, 16, 1);
    const Shape shape(ds.x0.shape().begin() + 1, ds.x0.shape().end());
    const GeneratorNet G(nc, shape, 5);
    const std::vector<int> ts(16, 7);
    const TensorBatch zero(ds.x0.shape());
    for (auto _ : state) benchmark::DoNotOptimize(G.forward(ds.y, ts, ds.y, zero));
    state.SetLabel(nc.kind == NetKind::Mlp ? "mlp" : "tiny_unet");
}
BENCHMARK(BM_GeneratorForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    NetConfig nc;
    nc.kind = state.range(0) == 0 ? NetKind::Mlp : NetKind::TinyUnet;
    const Task task = nc.kind == NetKind::Mlp ? Task::Gauss2Gauss : Task::Shapes16;
    const auto ds = make_synthetic_pairs(task, 16, 1);
    const Shape shape(ds.x0.shape().begin() + 1, ds.x0.shape().end());
    const ScheduleTable table = build_schedule({32, 2.2, Variant::SelfRDB});
    TrainState st = init_train_state(nc, shape, 11);
    TrainConfig tc;
    for (auto _ : state) benchmark::DoNotOptimize(train_step(st, ds.x0, ds.y, table, tc));
    state.SetLabel(nc.kind == NetKind::Mlp ? "mlp, batch 16" : "tiny_unet, batch 16");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
    std::vector<double> a(256), b(256);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<double>(i % 17) / 16.0;
        b[i] = static_cast<double>(i % 13) / 12.0;
    }
    for (auto _ : state) benchmark::DoNotOptimize(ssim({a, 16, 16}, {b, 16, 16}));
}
BENCHMARK(BM_Ssim);

}  // namespace

BENCHMARK_MAIN();
