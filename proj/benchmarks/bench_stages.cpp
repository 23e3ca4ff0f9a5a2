#include <benchmark/benchmark.h>

#include <vector>

#include "ergowatch/features.hpp"
#include "ergowatch/recommend.hpp"
#include "ergowatch/simulate.hpp"
#include "ergowatch/trackfix.hpp"

using namespace ergowatch;

namespace {

std::vector<LandmarkFrame> stream(double seconds) {
    sim::StreamScript script;
    script.duration = seconds;
    for (double t = 1.0; t < seconds; t += 3.0) script.blinks.push_back(t);
    return sim::simulate(script, pose::RigidTemplate::canonical(), {}, 5).first;
}

void BM_TrackfixFilter(benchmark::State& state) {
    const auto frames = stream(10.0);
    const std::vector<LandmarkFrame> warm(frames.begin(), frames.begin() + 15);
    trackfix::TrackState track(trackfix::learn_jitter(warm, 0.05));
    track.reset_to_mean(warm);
    std::size_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(track.filter_frame(frames[k]));
        k = (k + 1) % frames.size();
    }
}
BENCHMARK(BM_TrackfixFilter);

void BM_BlinkDetector(benchmark::State& state) {
    const auto frames = stream(10.0);
    features::BlinkDetector detector(30.0, {});
    std::size_t k = 0, n = 0;
    for (auto _ : state) {
        const auto& f = frames[k];
        benchmark::DoNotOptimize(detector.update(n++, f.t, f.eyes, f.d));
        k = (k + 1) % frames.size();
    }
}
BENCHMARK(BM_BlinkDetector);

void BM_FuzzyInference(benchmark::State& state) {
    const auto rules = recommend::RuleSet::defaults();
    const recommend::FeatureSnapshot features{{"work_minutes", 31.0},
                                              {"bad_pose_minutes", 9.0},
                                              {"yawns_period", 4.0},
                                              {"bad_pose_fraction", 0.4},
                                              {"blink_rate", 14.0}};
    for (auto _ : state) benchmark::DoNotOptimize(recommend::infer(rules, recommend::eval_premises(rules, features)));
}
BENCHMARK(BM_FuzzyInference);

}  // namespace

BENCHMARK_MAIN();
