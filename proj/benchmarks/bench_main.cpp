#include <benchmark/benchmark.h>

#include "otdebias/galaxy.hpp"
#include "otdebias/rng.hpp"
#include "otdebias/ssm.hpp"
#include "otdebias/transport.hpp"
#include "otdebias/wavelet.hpp"

using namespace otdebias;

static void BM_Scan(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 8;
  Rng rng(3);
  const Tensor x = normal_sample(rng, {t, d});
  const Tensor delta({t, d}, 0.5);
  const auto params = ssm::SSMParams::uniform(d, -0.3, 1.0, 0.8, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(ssm::scan(x, params, delta));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Scan)->RangeMultiplier(2)->Range(1 << 10, 1 << 15)->Complexity(benchmark::oN);

static void BM_Sinkhorn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto edges = transport::uniform_edges(n, 0.0, 2.0);
  Rng rng(5);
  std::vector<double> a(n), b(n);
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a[i] = rng.uniform() + 0.05;
    sb += b[i] = rng.uniform() + 0.05;
  }
  for (std::size_t i = 0; i < n; ++i) a[i] /= sa, b[i] /= sb;
  const auto centers = transport::make_histogram(edges, a).centers();
  const Tensor cost = transport::squared_distance_cost(centers);
  for (auto _ : state) benchmark::DoNotOptimize(transport::sinkhorn(a, b, cost, {}));
}
BENCHMARK(BM_Sinkhorn)->Arg(20)->Arg(40)->Arg(80);

static void BM_Decompose(benchmark::State& state) {
  io::SyntheticGalaxySpec spec;
  spec.resolution = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor image = io::gen_galaxy(spec, rng);
  const auto bank = wavelet::make_gabor_bank();
  for (auto _ : state) benchmark::DoNotOptimize(wavelet::decompose(image, bank));
}
BENCHMARK(BM_Decompose)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK_MAIN();
