#include <benchmark/benchmark.h>

#include <vector>

#include "ergowatch/pipeline.hpp"
#include "ergowatch/simulate.hpp"

using namespace ergowatch;

namespace {

void BM_PipelineMinute(benchmark::State& state) {
    sim::StreamScript script;
    script.duration = 60.0;
    for (double t = 1.0; t < 60.0; t += 4.0) script.blinks.push_back(t);
    script.yawns = {{20.0, 23.0}};
    const auto frames = sim::simulate(script, pose::RigidTemplate::canonical(), {}, 7).first;
    const PipelineConfig config;
    for (auto _ : state) {
        state.PauseTiming();
        Pipeline p = Pipeline::from_config(config);
        state.ResumeTiming();
        for (const auto& f : frames) p.process(f);
        p.finish();
        benchmark::DoNotOptimize(p.events().size());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}
BENCHMARK(BM_PipelineMinute)->Unit(benchmark::kMillisecond);

void BM_SimulateMinute(benchmark::State& state) {
    sim::StreamScript script;
    script.duration = 60.0;
    for (auto _ : state) {
        sim::Simulator s(script, pose::RigidTemplate::canonical(), {}, 7);
        while (!s.done()) benchmark::DoNotOptimize(s.next());
    }
}
BENCHMARK(BM_SimulateMinute)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
