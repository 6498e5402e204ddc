#include <benchmark/benchmark.h>

#include <vector>

#include "indcal/calibration.hpp"
#include "indcal/core_math.hpp"
#include "indcal/random.hpp"

using namespace indcal;

namespace {

std::vector<double> uniform_sample(std::size_t n) {
  Rng rng(1);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform_open();
  return v;
}

void BM_W1ToUniform(benchmark::State& state) {
  const EmpiricalPit pits(uniform_sample(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(w1_to_uniform(pits));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_W1ToUniform)->RangeMultiplier(10)->Range(100, 100000);

void BM_Ece(benchmark::State& state) {
  const EmpiricalPit pits(uniform_sample(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(ece(pits));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ece)->RangeMultiplier(10)->Range(100, 100000);

// Includes the sort inside EmpiricalPit.
void BM_EmpiricalPitBuild(benchmark::State& state) {
  const auto v = uniform_sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(EmpiricalPit(v));
}
BENCHMARK(BM_EmpiricalPitBuild)->RangeMultiplier(10)->Range(100, 100000);

void BM_Pav(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  std::vector<IsotonicPoint> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = {static_cast<double>(i), static_cast<double>(i) / n + 0.3 * rng.normal()};
  }
  for (auto _ : state) benchmark::DoNotOptimize(pav_fitted_values(pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Pav)->RangeMultiplier(10)->Range(100, 100000);

void BM_RecalibrationMap(benchmark::State& state) {
  auto v = uniform_sample(static_cast<std::size_t>(state.range(0)));
  for (double& x : v) x = x * x;
  for (auto _ : state) benchmark::DoNotOptimize(fit_recalibration_map(v));
}
BENCHMARK(BM_RecalibrationMap)->Arg(1000)->Arg(10000);

void BM_InvCdf(benchmark::State& state) {
  const auto v = uniform_sample(1024);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(std_normal_inv_cdf(v[i++ & 1023]));
}
BENCHMARK(BM_InvCdf);

}  // namespace
