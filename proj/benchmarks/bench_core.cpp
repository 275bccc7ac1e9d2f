#include <benchmark/benchmark.h>

#include "metalearn/meta.hpp"
#include "metalearn/mlp.hpp"
#include "metalearn/sine.hpp"

using namespace metalearn;

namespace {

MlpSpec sine_spec() {
    MlpSpec s;
    s.layer_sizes = {1, 64, 64, 1};
    return s;
}

struct SineFixture {
    MlpSpec spec = sine_spec();
    RngStream rng{7, 0};
    SineTask task = sine_sample(SineFamilyConfig{}, spec, rng);
    ParamVector phi = mlp_init(spec, rng);
    Minibatch batch;

    SineFixture() {
        const std::vector<std::size_t> ids{0, 1, 2, 3, 4};
        batch = task.make_batch(ids, DataPool::train);
    }
};

void BM_MlpGrad(benchmark::State& state) {
    SineFixture f;
    const MlpLoss loss(f.spec, f.batch);
    for (auto _ : state) benchmark::DoNotOptimize(loss.grad(f.phi));
}
BENCHMARK(BM_MlpGrad);

void BM_MlpHvp(benchmark::State& state) {
    SineFixture f;
    const MlpLoss loss(f.spec, f.batch);
    const ParamVector v = loss.grad(f.phi);
    for (auto _ : state) benchmark::DoNotOptimize(loss.hvp(f.phi, v));
}
BENCHMARK(BM_MlpHvp);

void BM_InnerLoop(benchmark::State& state) {
    SineFixture f;
    InnerLoopConfig c;
    c.iterations = static_cast<std::size_t>(state.range(0));
    c.batch_size = 5;
    c.optimizer = OptimizerConfig::sgd(0.02);
    c.record_trajectory = false;
    for (auto _ : state) {
        RngStream r(1, 1);
        benchmark::DoNotOptimize(run_inner(f.phi, f.task, c, r));
    }
}
BENCHMARK(BM_InnerLoop)->Arg(1)->Arg(10)->Arg(32);

void BM_MamlDirection(benchmark::State& state) {
    SineFixture f;
    InnerLoopConfig c;
    c.iterations = static_cast<std::size_t>(state.range(0));
    c.batch_size = 5;
    RngStream r(1, 2);
    const auto batches = sample_batches(f.task, c, r);
    for (auto _ : state) benchmark::DoNotOptimize(maml_direction(f.phi, f.task, batches, 0.02));
}
BENCHMARK(BM_MamlDirection)->Arg(1)->Arg(5);

}  // namespace

BENCHMARK_MAIN();
