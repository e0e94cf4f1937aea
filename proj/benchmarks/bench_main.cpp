#include "teddn/adam.hpp"
#include "teddn/gc_module.hpp"
#include "teddn/model.hpp"
#include "teddn/ops.hpp"
#include "teddn/rng.hpp"
#include "teddn/tape.hpp"
#include "teddn/training.hpp"

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

namespace {

using namespace teddn;

Tensor random_tensor(Rng& rng, std::vector<long> shape) {
    Tensor t(shape);
    for (real& v : t.values()) v = static_cast<real>(rng.uniform(-1, 1));
    return t;
}

ModelConfig bench_config(long nodes) {
    ModelConfig mc;
    mc.nodes = nodes;
    mc.channels = 1;
    mc.t_h = 12;
    mc.t_out = 12;
    mc.d_t = 8;
    mc.d_n = 8;
    mc.d_g = 8;
    mc.d_h = 16;
    mc.hops = 2;
    mc.reduction_ratio = 2;
    mc.steps_per_day = 288;
    mc.start_weekday = 0;
    return mc;
}

struct ForwardInputs {
    Tensor inputs;
    std::vector<long> tod;
    std::vector<long> dow;
};

ForwardInputs make_inputs(const ModelConfig& mc, long batch, Rng& rng) {
    ForwardInputs f;
    f.inputs = random_tensor(rng, {batch, mc.t_h, mc.nodes, mc.channels});
    for (long i = 0; i < batch * mc.t_h; ++i) {
        f.tod.push_back(rng.index(mc.steps_per_day));
        f.dow.push_back(rng.index(7));
    }
    return f;
}

void BM_Matmul(benchmark::State& state) {
    const long n = state.range(0);
    Rng rng(1);
    const Tensor a = random_tensor(rng, {n, n});
    const Tensor b = random_tensor(rng, {n, n});
    for (auto _ : state) {
        Tensor c = ops::matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_AdjacencyBuild(benchmark::State& state) {
    const long nodes = state.range(0);
    Rng rng(2);
    gc::GraphParams gp = gc::make_graph(nodes, 8, static_cast<real>(3), rng, "bench");
    for (auto _ : state) {
        Tensor p = gc::normalize_adjacency(gc::learn_adjacency(gp, nullptr));
        benchmark::DoNotOptimize(p.data());
    }
}
BENCHMARK(BM_AdjacencyBuild)->Arg(170)->Arg(340);

void BM_ModelForward(benchmark::State& state) {
    const ModelConfig mc = bench_config(state.range(0));
    TeddnModel model = TeddnModel::build(mc, 1);
    Rng rng(3);
    const ForwardInputs f = make_inputs(mc, 32, rng);
    for (auto _ : state) {
        Tensor pred = model.forward(f.inputs, f.tod, f.dow, nullptr);
        benchmark::DoNotOptimize(pred.data());
    }
}
BENCHMARK(BM_ModelForward)->Arg(16)->Arg(170);

void BM_TrainStep(benchmark::State& state) {
    const ModelConfig mc = bench_config(state.range(0));
    TeddnModel model = TeddnModel::build(mc, 1);
    Adam opt(model.parameters());
    Rng rng(4);
    const ForwardInputs f = make_inputs(mc, 32, rng);
    const Tensor targets = random_tensor(rng, {32, mc.t_out, mc.nodes, mc.channels});
    for (auto _ : state) {
        Tape tape;
        Tensor pred = model.forward(f.inputs, f.tod, f.dow, &tape);
        Tensor loss = horizon_loss(pred, targets, mc.t_out, mc.t_out);
        opt.zero_grad();
        tape.backward(loss);
        opt.step();
        benchmark::DoNotOptimize(loss.data());
    }
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(170);

} // namespace

BENCHMARK_MAIN();
