#include <benchmark/benchmark.h>

#include <vector>

#include "indcal/nn.hpp"
#include "indcal/random.hpp"
#include "indcal/training.hpp"

using namespace indcal;

namespace {

void BM_Forward(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const MlpParams p = mlp_init(std::vector<std::size_t>{8, h, h, 2}, 1);
  const std::vector<double> x{0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8};
  ForwardTrace trace;
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(p, x, 0.3, trace));
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const MlpParams p = mlp_init(std::vector<std::size_t>{8, h, h, 2}, 1);
  const std::vector<double> x{0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8};
  ForwardTrace trace;
  for (auto _ : state) {
    mlp_forward(p, x, 0.3, trace);
    benchmark::DoNotOptimize(mlp_backward(p, trace, 1.0, 0.5));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64);

// One minibatch of the combined objective, value and gradient.
void BM_CombinedLossBatch(benchmark::State& state) {
  const std::size_t batch = 128;
  Rng rng(3);
  std::vector<double> x(batch * 8), y(batch), r(batch);
  for (double& v : x) v = rng.normal();
  for (double& v : y) v = rng.normal();
  for (double& v : r) v = rng.uniform_open();
  const Dataset d(x, y, {"a", "b", "c", "d", "e", "f", "g", "h"});
  const MlpParams p = mlp_init(std::vector<std::size_t>{8, 64, 64, 2}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(loss_combined(0.5, p, d, r));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_CombinedLossBatch);

}  // namespace
