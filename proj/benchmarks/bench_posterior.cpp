#include <benchmark/benchmark.h>

#include "implab/noise.hpp"
#include "implab/posterior.hpp"

using namespace implab;

namespace {

ProbVector random_simplex(int c, rng::Stream& rng) {
  ProbVector p(c);
  double sum = 0.0;
  for (double& v : p) {
    v = rng.uniform() + 1e-4;
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

static void BM_PosteriorPartial(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  rng::Stream rng(3);
  const ProbVector pred = random_simplex(c, rng);
  std::vector<int> cand;
  for (int k = 0; k < c; k += 2) cand.push_back(k);
  for (auto _ : state) {
    auto t = posterior_partial(pred, cand);
    benchmark::DoNotOptimize(t);
  }
}
BENCHMARK(BM_PosteriorPartial)->Arg(10)->Arg(100);

static void BM_PosteriorNoisy(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  rng::Stream rng(5);
  const ProbVector pred = random_simplex(c, rng);
  auto model = NoiseModel::make(c, 1.0);
  for (double& v : model.omega.data) v = rng.gaussian();
  const Matrix t = model.transition_matrix();
  for (auto _ : state) {
    auto post = posterior_noisy(pred, 1, t);
    benchmark::DoNotOptimize(post);
  }
}
BENCHMARK(BM_PosteriorNoisy)->Arg(10)->Arg(100);

static void BM_NoiseGradients(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  rng::Stream rng(7);
  const ProbVector pred = random_simplex(c, rng);
  auto model = NoiseModel::make(c, 1.0);
  for (double& v : model.omega.data) v = rng.gaussian();
  const Matrix t = model.transition_matrix();
  for (auto _ : state) {
    auto g = noise_gradients(pred, 2, t);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_NoiseGradients)->Arg(10)->Arg(100);
