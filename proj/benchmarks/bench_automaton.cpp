#include <benchmark/benchmark.h>

#include "implab/automaton.hpp"

using namespace implab;

namespace {

LabelNfa make_random_nfa(int n, int c, std::uint64_t seed) {
  rng::Stream rng(seed);
  std::vector<std::vector<std::uint8_t>> allowed(
      n, std::vector<std::uint8_t>(c, 0));
  std::vector<ProbVector> emissions(n, ProbVector(c));
  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int y = 0; y < c; ++y) {
      allowed[i][y] = rng.uniform() < 0.6;
      any = any || allowed[i][y];
    }
    if (!any) allowed[i][static_cast<int>(rng.bounded(c))] = 1;
    double sum = 0.0;
    for (double& v : emissions[i]) {
      v = rng.uniform() + 1e-4;
      sum += v;
    }
    for (double& v : emissions[i]) v /= sum;
  }
  return LabelNfa::make(std::move(allowed), std::move(emissions));
}

}  // namespace

static void BM_ForwardBackward(benchmark::State& state) {
  const auto nfa = make_random_nfa(static_cast<int>(state.range(0)),
                                   static_cast<int>(state.range(1)), 42);
  for (auto _ : state) {
    auto post = forward_backward(nfa);
    benchmark::DoNotOptimize(post);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)
    ->Args({64, 10})
    ->Args({1024, 10})
    ->Args({16384, 10})
    ->Args({1024, 100});

static void BM_BruteForcePosterior(benchmark::State& state) {
  const auto nfa = make_random_nfa(static_cast<int>(state.range(0)), 4, 7);
  for (auto _ : state) {
    auto post = brute_force_posterior(nfa);
    benchmark::DoNotOptimize(post);
  }
}
BENCHMARK(BM_BruteForcePosterior)->Arg(4)->Arg(6)->Arg(8);
