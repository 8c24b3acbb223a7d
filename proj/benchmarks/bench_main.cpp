#include <benchmark/benchmark.h>

#include <dlokit/geom.hpp>

#include <random>

namespace {

std::vector<dlokit::Pose> random_poses(int n) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<dlokit::Pose> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    dlokit::Quat q(g(rng), g(rng), g(rng), g(rng));
    out.push_back(dlokit::make_pose(dlokit::Vec3(g(rng), g(rng), g(rng)), q));
  }
  return out;
}

void BM_pose_compose(benchmark::State& state) {
  const auto poses = random_poses(256);
  size_t i = 0;
  for (auto _ : state) {
    const auto& a = poses[i % poses.size()];
    const auto& b = poses[(i + 1) % poses.size()];
    benchmark::DoNotOptimize(dlokit::pose_compose(a, b));
    ++i;
  }
}
BENCHMARK(BM_pose_compose);

}  // namespace

BENCHMARK_MAIN();
