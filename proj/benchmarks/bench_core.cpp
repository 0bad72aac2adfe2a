#include <benchmark/benchmark.h>

#include "gentract/gen/model.hpp"
#include "gentract/nd/ops.hpp"
#include "gentract/sh/basis.hpp"

using namespace gentract;

namespace {

nd::Tensor randn(std::vector<int> shape, nd::Rng& rng) {
    nd::Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
    return t;
}

void BM_Matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    nd::Rng rng(1);
    nd::Tensor a = randn({n, n}, rng);
    nd::Tensor b = randn({n, n}, rng);
    for (auto _ : state) {
        nd::Graph g;
        benchmark::DoNotOptimize(nd::matmul(g.input(a), g.input(b)).value().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_TransformerForward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    nd::Rng rng(2);
    gen::GeneratorConfig cfg;
    cfg.layers = 4;
    cfg.width = 64;
    cfg.heads = 4;
    cfg.points = 32;
    cfg.context_channels = 48;
    gen::GeneratorParams params = gen::GeneratorParams::init(cfg, rng);
    nd::Tensor x = randn({batch, 32, 3}, rng);
    nd::Tensor ctx = randn({batch, 64, 48}, rng);
    gen::TimeBatch t;
    t.steps.assign(static_cast<std::size_t>(batch), 500);
    for (auto _ : state) {
        nd::Graph g;
        nd::Var ctx_n = gen::project_context(g, params, g.input(ctx), true);
        benchmark::DoNotOptimize(
            gen::generator_forward(g, params, g.input(x), t, ctx_n, true).value().data());
    }
}
BENCHMARK(BM_TransformerForward)->Arg(16)->Arg(64);

void BM_TransformerTrainStep(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    nd::Rng rng(3);
    gen::GeneratorConfig cfg;
    cfg.layers = 4;
    cfg.width = 64;
    cfg.heads = 4;
    cfg.points = 32;
    cfg.context_channels = 48;
    gen::GeneratorParams params = gen::GeneratorParams::init(cfg, rng);
    nd::Tensor x = randn({batch, 32, 3}, rng);
    nd::Tensor target = randn({batch, 32, 3}, rng);
    nd::Tensor ctx = randn({batch, 64, 48}, rng);
    gen::TimeBatch t;
    t.steps.assign(static_cast<std::size_t>(batch), 500);
    for (auto _ : state) {
        nd::Graph g;
        nd::Var ctx_n = gen::project_context(g, params, g.input(ctx), false);
        nd::Var out = gen::generator_forward(g, params, g.input(x), t, ctx_n, false);
        nd::Var diff = nd::sub(out, g.input(target));
        nd::Var loss = nd::mean_all(nd::mul(diff, diff));
        benchmark::DoNotOptimize(g.backward(loss));
    }
}
BENCHMARK(BM_TransformerTrainStep)->Arg(16);

void BM_ShFit(benchmark::State& state) {
    nd::Rng rng(4);
    sh::SHCoeffs c(6);
    for (double& v : c.values) v = rng.normal();
    std::vector<sh::SphereSample> samples;
    for (const sh::Direction& d : sh::fibonacci_directions(72)) samples.push_back({d, sh::eval_fodf(c, d)});
    for (auto _ : state) benchmark::DoNotOptimize(sh::fit_sh(samples, 6));
}
BENCHMARK(BM_ShFit);

}  // namespace

BENCHMARK_MAIN();
