#include <benchmark/benchmark.h>

#include <numeric>

#include "implab/trainer.hpp"

using namespace implab;

static void BM_BatchLoss(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const auto base = make_blobs(batch, 16, 10, 3.0, 11);
  const auto data = make_mixed(base, batch / 2, 0.3, 0.2, 5);
  const auto model = Classifier::make_mlp(16, 10, 64, 3);
  NoiseModel noise = NoiseModel::make(10, 1.0);
  TrainConfig cfg;
  cfg.task = TaskKind::kMixed;
  const auto fstd = feature_stddev(data);
  std::vector<int> idx(batch);
  std::iota(idx.begin(), idx.end(), 0);

  for (auto _ : state) {
    auto loss = batch_loss(data, idx, model, &noise, cfg, 0, fstd);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_BatchLoss)->Arg(60)->Arg(240);

static void BM_TrainEpoch(benchmark::State& state) {
  const auto base = make_blobs(1000, 16, 10, 3.0, 13);
  const auto data = make_partial(base, 0.3, 7);
  const auto test = make_blobs(100, 16, 10, 3.0, 17);
  TrainConfig cfg;
  cfg.task = TaskKind::kPll;
  cfg.epochs = 1;

  for (auto _ : state) {
    auto r = train(data, test, cfg);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_TrainEpoch);

BENCHMARK_MAIN();
