#include <benchmark/benchmark.h>

#include "dbn/em.hpp"
#include "dbn/exact.hpp"
#include "dbn/inference.hpp"
#include "dbn/rng.hpp"
#include "dbn/sampling.hpp"
#include "dbn/statistics.hpp"

namespace {

using namespace dbn;

// Coupled ring of binary variables, the first `hidden` unobserved.
Dbn ring(int n, int hidden) {
    Dbn m;
    for (int v = 0; v < n; ++v)
        m.variables.push_back({v, "V" + std::to_string(v), 2,
                               v < hidden ? VarKind::Hidden
                                          : VarKind::Observable});
    m.structure.parents.assign(n, {});
    m.structure.max_indegree = 2;
    Rng rng(99);
    m.prior.assign(1, {});
    for (int v = 0; v < n; ++v) {
        m.structure.add_arc(v, {v, 1});
        m.structure.add_arc(v, {(v + n - 1) % n, 1});
        Cpt c = Cpt::uniform(v, 2, m.structure.parents[v], {2, 2});
        for (std::size_t r = 0; r < 4; ++r) {
            const double p = rng.uniform(0.15, 0.85);
            c.at(r, 0) = p;
            c.at(r, 1) = 1 - p;
        }
        m.cpts.push_back(std::move(c));
        m.prior[0].push_back({0.5, 0.5});
    }
    return m;
}

void BM_ForwardStep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Dbn model = ring(n, 3);
    SliceTreeEngine engine(model, ClusterPartition::singletons(n));
    const Dataset d = sample_trajectories(model, 1, 3, 1);
    const auto aligned = align_dataset(model, d);
    FactoredMessage alpha = engine.initial_alpha(aligned[0][0]);
    for (auto _ : state) {
        auto next = engine.forward_step(alpha, aligned[0][1], 1);
        benchmark::DoNotOptimize(next.log_scale);
    }
}
BENCHMARK(BM_ForwardStep)->Arg(6)->Arg(10)->Arg(14);

void BM_SmoothSequence(benchmark::State& state) {
    const Dbn model = ring(10, 3);
    SliceTreeEngine engine(model, ClusterPartition::singletons(10));
    const Dataset d =
        sample_trajectories(model, 1, static_cast<int>(state.range(0)), 2);
    const auto aligned = align_dataset(model, d);
    for (auto _ : state) {
        auto [ll, s0] = engine.smooth(
            aligned[0], [](int, const CalibratedSliceTree&) {});
        benchmark::DoNotOptimize(ll);
    }
    state.SetItemsProcessed(state.iterations() * (state.range(0) - 1));
}
BENCHMARK(BM_SmoothSequence)->Arg(256)->Arg(1024);

void BM_ExactForwardBackward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Dbn model = ring(n, 3);
    FlatEngine flat(model);
    const Dataset d = sample_trajectories(model, 1, 256, 3);
    const auto aligned = align_dataset(model, d);
    for (auto _ : state) {
        auto ess = flat.family_ess(aligned);
        benchmark::DoNotOptimize(ess.loglik);
    }
    state.SetItemsProcessed(state.iterations() * 255);
}
BENCHMARK(BM_ExactForwardBackward)->Arg(6)->Arg(10);

void BM_FactoredEssSweep(benchmark::State& state) {
    const Dbn model = ring(10, 3);
    const Dataset d = sample_trajectories(model, 1, 1024, 4);
    const auto aligned = align_dataset(model, d);
    for (auto _ : state) {
        FactoredEssSource source(model, ClusterPartition::singletons(10),
                                 aligned);
        benchmark::DoNotOptimize(source.loglik());
    }
    state.SetItemsProcessed(state.iterations() * 1023);
}
BENCHMARK(BM_FactoredEssSweep);

void BM_CompleteCounts(benchmark::State& state) {
    const Dbn model = ring(10, 0);
    const Dataset d = sample_trajectories(model, 1, 4096, 5);
    const auto aligned = align_dataset(model, d);
    std::vector<Event> events;
    for (int c = 0; c < 10; ++c)
        events.push_back(family_event(model.structure, c));
    for (auto _ : state) {
        auto tabs = complete_counts(aligned, model.cardinalities(), events);
        benchmark::DoNotOptimize(tabs[0].total);
    }
    state.SetItemsProcessed(state.iterations() * 4095 * 10);
}
BENCHMARK(BM_CompleteCounts);

} // namespace

BENCHMARK_MAIN();
