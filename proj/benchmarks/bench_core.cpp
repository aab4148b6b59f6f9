#include "msinr/grad_engine.hpp"
#include "msinr/models.hpp"
#include "msinr/pruning.hpp"
#include "msinr/random.hpp"
#include "msinr/signals.hpp"

#include <benchmark/benchmark.h>

using namespace msinr;

namespace {

ArchSpec siren(std::size_t width) {
  ArchSpec a;
  a.width = width;
  a.hidden_layers = 2;
  a.seed = 1;
  return a;
}

Precision precision_arg(const benchmark::State& state) { return state.range(1) ? Precision::f32 : Precision::f64; }

}  // namespace

// range(0): width, range(1): 1 for f32
static void BM_Grad(benchmark::State& state) {
  const ArchSpec a = siren(static_cast<std::size_t>(state.range(0)));
  const auto net = build_network(a);
  const auto p = init(a).values;
  const Mask m = full_mask(a);
  const Signal s = synth_set(0, 2, 32).train.front();
  for (auto _ : state) benchmark::DoNotOptimize(grad(net, p, m, s, precision_arg(state)));
}
BENCHMARK(BM_Grad)->Args({64, 0})->Args({64, 1})->Args({128, 1})->Unit(benchmark::kMillisecond);

static void BM_MetaGradient(benchmark::State& state) {
  const ArchSpec a = siren(static_cast<std::size_t>(state.range(0)));
  const auto net = build_network(a);
  const auto p = init(a).values;
  const Mask m = full_mask(a);
  const Signal s = synth_set(0, 2, 32).train.front();
  for (auto _ : state)
    benchmark::DoNotOptimize(meta_gradient(net, p, m, s, {5e-5, 2}, precision_arg(state)));
}
BENCHMARK(BM_MetaGradient)->Args({64, 0})->Args({64, 1})->Unit(benchmark::kMillisecond);

static void BM_MagnitudePrune(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = rng.normal();
  const Mask m = Mask::dense(n);
  for (auto _ : state) benchmark::DoNotOptimize(magnitude_prune(v, m, 0.2));
}
BENCHMARK(BM_MagnitudePrune)->Arg(4547)->Arg(198915)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
