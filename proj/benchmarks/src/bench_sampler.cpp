#include <benchmark/benchmark.h>

#include "metabayes/data.hpp"
#include "metabayes/sampler.hpp"

using namespace metabayes;

namespace {

Posterior topiramate() {
  ModelSpec spec;
  spec.priors.mu = PriorSpec::normal(0, 10);
  spec.priors.theta = PriorSpec::normal(0, 2.5);
  spec.priors.tau = PriorSpec::half_normal(0.5);
  return Posterior(spec, builtin_dataset(BuiltinDataset::boucher2016_pairwise));
}

void BM_HmcTransition(benchmark::State& state) {
  const Posterior post = topiramate();
  const Target target = make_target(post);
  const std::vector<double> inv_mass(target.dimension, 1.0);
  PhasePoint point = make_point(target.log_density, std::vector<double>(target.dimension, 0.1));
  Rng rng(7);
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    Transition tr = hmc_transition(point, 0.1, inv_mass, steps, target.log_density, rng);
    point = std::move(tr.point);
    benchmark::DoNotOptimize(point.log_density);
  }
}
BENCHMARK(BM_HmcTransition)->Arg(8)->Arg(32);

void BM_FitTopiramate(benchmark::State& state) {
  const Posterior post = topiramate();
  SamplerConfig config;
  config.chains = 1;
  config.iter = 1000;
  config.warmup = 500;
  config.target_accept = 0.98;
  for (auto _ : state) benchmark::DoNotOptimize(run_chains(make_target(post), config));
}
BENCHMARK(BM_FitTopiramate)->Unit(benchmark::kMillisecond);

}  // namespace
