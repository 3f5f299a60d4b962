#include <benchmark/benchmark.h>

#include <random>

#include "metabayes/data.hpp"
#include "metabayes/posterior.hpp"

using namespace metabayes;

namespace {

ModelSpec pairwise_spec() {
  ModelSpec spec;
  spec.priors.mu = PriorSpec::normal(0, 10);
  spec.priors.theta = PriorSpec::normal(0, 2.5);
  spec.priors.tau = PriorSpec::half_normal(0.5);
  return spec;
}

ModelSpec mbma_spec() {
  ModelSpec spec;
  spec.family = ModelFamily::mbma;
  spec.dose_response = DoseResponseKind::emax;
  return spec;
}

std::vector<double> point(std::size_t dim) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> z(dim);
  for (double& v : z) v = unif(rng);
  return z;
}

void BM_PairwiseGradient(benchmark::State& state) {
  Posterior post(pairwise_spec(), builtin_dataset(BuiltinDataset::boucher2016_pairwise));
  const auto z = point(post.dimension());
  for (auto _ : state) benchmark::DoNotOptimize(post.evaluate(z));
}
BENCHMARK(BM_PairwiseGradient);

void BM_MbmaGradient(benchmark::State& state) {
  Posterior post(mbma_spec(), builtin_dataset(BuiltinDataset::boucher2016_full));
  const auto z = point(post.dimension());
  for (auto _ : state) benchmark::DoNotOptimize(post.evaluate(z));
}
BENCHMARK(BM_MbmaGradient);

void BM_MbmaCenteredGradient(benchmark::State& state) {
  ModelSpec spec = mbma_spec();
  spec.non_centered = false;
  Posterior post(spec, builtin_dataset(BuiltinDataset::boucher2016_full));
  const auto z = point(post.dimension());
  for (auto _ : state) benchmark::DoNotOptimize(post.evaluate(z));
}
BENCHMARK(BM_MbmaCenteredGradient);

}  // namespace
