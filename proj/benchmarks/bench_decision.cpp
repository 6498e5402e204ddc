#include <benchmark/benchmark.h>

#include "indcal/decision.hpp"

using namespace indcal;

namespace {

void BM_QuadratureExpectedLoss(benchmark::State& state) {
  const MonotonicLossSpec loss = exponential_pair_loss(0.0, 1.0);
  const Forecast f(GaussianForecast{0.3, 0.8});
  for (auto _ : state) benchmark::DoNotOptimize(bayes_action(f, loss));
}
BENCHMARK(BM_QuadratureExpectedLoss);

void BM_StepExpectedLoss(benchmark::State& state) {
  const MonotonicLossSpec loss = bank_loss(0.3);
  const Forecast f(GaussianForecast{0.5, 0.2});
  for (auto _ : state) benchmark::DoNotOptimize(bayes_action(f, loss));
}
BENCHMARK(BM_StepExpectedLoss);

void BM_BankDecide(benchmark::State& state) {
  const Forecast f(GaussianForecast{0.5, 0.2});
  for (auto _ : state) benchmark::DoNotOptimize(bank_decide(f, 0.3));
}
BENCHMARK(BM_BankDecide);

}  // namespace
