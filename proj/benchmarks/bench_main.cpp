#include <benchmark/benchmark.h>

#include <random>

#include "common/cca_oracle.hpp"
#include "common/gcnn_oracles.hpp"
#include "lesionuq/gcnn.hpp"
#include "lesionuq/lesions.hpp"
#include "lesionuq/synth.hpp"
#include "lesionuq/uncertainty_maps.hpp"

using namespace lesionuq;

namespace {

void BM_ConnectedComponents(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(1);
  const LabelVolume mask = oracle::random_mask(Dims{n, n, n}, 0.3, gen);
  for (auto _ : state) benchmark::DoNotOptimize(connected_components_26(mask));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_ConnectedComponents)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ComputeMaps(benchmark::State& state) {
  SynthConfig cfg;
  cfg.dims = Dims{48, 48, 48};
  cfg.samples = static_cast<int>(state.range(0));
  const Scene scene = generate_scene(cfg, 0);
  for (auto _ : state) benchmark::DoNotOptimize(compute_maps(scene.ensemble));
}
BENCHMARK(BM_ComputeMaps)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_GcnnForward(benchmark::State& state) {
  std::mt19937_64 gen(2);
  Rng rng(2);
  const PreparedGraph g = prepare_graph(oracle::random_graph(static_cast<std::size_t>(state.range(0)), 5, gen), nullptr);
  const GcnnParams p = GcnnParams::glorot(5, 64, Variant::Classification, rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward(g, p, Variant::Classification));
}
BENCHMARK(BM_GcnnForward)->Arg(50)->Arg(500)->Arg(2000);

void BM_GcnnLossAndGradients(benchmark::State& state) {
  std::mt19937_64 gen(3);
  Rng rng(3);
  std::vector<PreparedGraph> graphs;
  for (int i = 0; i < 10; ++i) {
    graphs.push_back(prepare_graph(oracle::random_graph(static_cast<std::size_t>(state.range(0)), 5, gen), nullptr));
  }
  std::vector<const PreparedGraph*> batch;
  for (const auto& g : graphs) batch.push_back(&g);
  const GcnnParams p = GcnnParams::glorot(5, 64, Variant::Regression, rng);
  GcnnParams grads;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(batch, p, Variant::Regression, &grads));
}
BENCHMARK(BM_GcnnLossAndGradients)->Arg(50)->Arg(500);

}  // namespace

BENCHMARK_MAIN();
