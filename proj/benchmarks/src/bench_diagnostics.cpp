#include <benchmark/benchmark.h>

#include <random>

#include "metabayes/diagnostics.hpp"

using namespace metabayes;

namespace {

std::vector<std::vector<double>> chains(std::size_t n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> out(4, std::vector<double>(n));
  for (auto& c : out) {
    for (double& v : c) v = normal(rng);
  }
  return out;
}

void BM_SplitRhat(benchmark::State& state) {
  const auto c = chains(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(split_rhat(c));
}
BENCHMARK(BM_SplitRhat)->Arg(2000)->Arg(20000);

void BM_Ess(benchmark::State& state) {
  const auto c = chains(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ess(c));
}
BENCHMARK(BM_Ess)->Arg(2000)->Arg(20000);

void BM_SummarizeParameter(benchmark::State& state) {
  const auto c = chains(2000);
  for (auto _ : state) benchmark::DoNotOptimize(summarize_parameter("x", c));
}
BENCHMARK(BM_SummarizeParameter);

}  // namespace
