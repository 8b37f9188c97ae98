#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "safekernel/reachability.hpp"
#include "safekernel/safety_controller.hpp"
#include "safekernel/simulation.hpp"

namespace sk = safekernel;

namespace {

std::shared_ptr<const sk::ValueFunction> small_vf() {
  static auto vf = [] {
    const sk::Grid3 grid = sk::Grid3::dubins(15.0, 61, 61, 30);
    return std::make_shared<const sk::ValueFunction>(
        sk::solve_hji(sk::signed_distance_payoff({0, 0, 2.25}, grid), sk::DubinsParams{3.0, 1.0}));
  }();
  return vf;
}

std::vector<sk::State> sample_states(int n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> xy(-14.0, 14.0), th(-3.14, 3.14);
  std::vector<sk::State> out;
  for (int i = 0; i < n; ++i) out.emplace_back(xy(rng), xy(rng), th(rng));
  return out;
}

void BM_InterpolateValue(benchmark::State& st) {
  const auto vf = small_vf();
  const auto xs = sample_states(1024);
  std::size_t i = 0;
  for (auto _ : st) benchmark::DoNotOptimize(sk::interpolate_value(*vf, xs[i++ & 1023]));
}
BENCHMARK(BM_InterpolateValue);

void BM_InterpolateGradient(benchmark::State& st) {
  const auto vf = small_vf();
  const auto xs = sample_states(1024);
  std::size_t i = 0;
  for (auto _ : st) benchmark::DoNotOptimize(sk::interpolate_gradient(*vf, xs[i++ & 1023]));
}
BENCHMARK(BM_InterpolateGradient);

void BM_SolveCoarse(benchmark::State& st) {
  const sk::Grid3 grid = sk::Grid3::dubins(15.0, 41, 41, 20);
  const sk::ValueFunction payoff = sk::signed_distance_payoff({0, 0, 2.25}, grid);
  for (auto _ : st) benchmark::DoNotOptimize(sk::solve_hji(payoff, sk::DubinsParams{3.0, 1.0}));
}
BENCHMARK(BM_SolveCoarse)->Unit(benchmark::kMillisecond);

void BM_FilterControl(benchmark::State& st) {
  const auto vf = small_vf();
  const auto xs = sample_states(1024);
  std::vector<sk::ObstacleView> obs;
  for (int k = 0; k < 10; ++k) obs.push_back({{4.0 * k - 18.0, 2.0 * (k % 3), 2.25}, k, true});
  sk::SafetyPolicy policy = sk::make_policy(vf, 0.3, 1.0 / 60.0);
  std::size_t i = 0;
  for (auto _ : st) {
    policy.engaged = false;
    benchmark::DoNotOptimize(sk::filter_control(policy, xs[i++ & 1023], 0.0, obs, sk::DubinsParams{3.0, 1.0}));
  }
}
BENCHMARK(BM_FilterControl);

void BM_WorldStep(benchmark::State& st) {
  sk::TeamSafety team;
  team.vf = small_vf();
  team.alpha = 0.3;
  sk::WorldState w = sk::spawn_world(sk::WorldConfig{}, team);
  for (auto _ : st) sk::step(w, std::nullopt);
}
BENCHMARK(BM_WorldStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
