#include <benchmark/benchmark.h>

#include "ergowatch/pose.hpp"

using namespace ergowatch;

namespace {

struct Fixture {
    pose::RigidTemplate tmpl = pose::RigidTemplate::canonical();
    pose::CameraIntrinsics A;
    pose::Pose truth;
    std::array<Point2, pose::kRigidCount> points{};

    Fixture() {
        truth = pose::pose_from_euler({0.2, -0.14, 0.07}, {20.0, -15.0, 550.0});
        points = pose::project(tmpl, truth, A);
    }
};

void BM_SolvePnpCold(benchmark::State& state) {
    const Fixture f;
    for (auto _ : state) benchmark::DoNotOptimize(pose::solve_pnp(f.points, f.tmpl, f.A));
}
BENCHMARK(BM_SolvePnpCold);

void BM_SolvePnpWarm(benchmark::State& state) {
    const Fixture f;
    for (auto _ : state) benchmark::DoNotOptimize(pose::solve_pnp(f.points, f.tmpl, f.A, f.truth));
}
BENCHMARK(BM_SolvePnpWarm);

void BM_Project(benchmark::State& state) {
    const Fixture f;
    for (auto _ : state) benchmark::DoNotOptimize(pose::project(f.tmpl, f.truth, f.A));
}
BENCHMARK(BM_Project);

}  // namespace

BENCHMARK_MAIN();
