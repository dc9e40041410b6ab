#ifndef IMPLAB_EXPERIMENT_HPP
#define IMPLAB_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "implab/trainer.hpp"

namespace implab {

// Fully resolved experiment description. The serialized form (key = value
// lines, '#' comments) is both the config-file format and the manifest
// written at the start of every run; a manifest alone reproduces the run.
struct ExperimentConfig {
  TaskKind task = TaskKind::kSupervised;

  // Synthetic data (ignored when data_path is set).
  int num_classes = 10;
  int dim = 16;
  int n_train = 4000;
  int n_test = 2000;
  double separation = 3.0;

  // Corruption parameters.
  double q = 0.3;      // partial ratio
  double eta = 0.2;    // noise ratio
  long labels = 1000;  // label budget l (ssl / mixed)

  std::string data_path;  // load the training set from a dataset CSV

  // Training.
  int epochs = 30;
  int batch_size = 64;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  double entropy_weight = 0.1;
  double weak_noise = 0.05;
  double strong_noise = 0.2;
  double strong_dropout = 0.25;
  double ema = 0.0;
  double noise_scale = 1.0;
  double noise_lr = -1.0;
  std::string arch = "linear";
  int hidden = 64;

  // Execution.
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string out_dir = "out";
  int jobs = 1;

  TrainConfig train_config(std::uint64_t seed) const;
  void validate() const;
};

// Applies one "key = value" assignment; throws ConfigError on unknown keys or
// unparsable values.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);

// Reads a config/manifest file on top of `base` (built-in defaults usually).
ExperimentConfig load_config_file(const std::string& path,
                                  ExperimentConfig base);

void write_manifest(const ExperimentConfig& cfg, const std::string& path);

// ---------------------------------------------------------------------------

struct PreparedData {
  ImpreciseDataset train;
  ImpreciseDataset test;
  std::optional<Matrix> true_transition;  // known generative noise, if any
};

// Generates (or loads) the training data for one seed and corrupts it
// according to the task.
PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunOutcome {
  std::vector<double> seed_accuracies;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // sample standard deviation over seeds
};

// Runs every seed, writing under cfg.out_dir:
//   manifest.cfg (first), seed_<s>/metrics.csv, seed_<s>/summary.json,
//   seed_<s>/transition.json (tasks with a noise model), aggregate.json.
RunOutcome run_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------

struct SweepGrid {
  std::vector<long> labels;
  std::vector<double> qs;
  std::vector<double> etas;
};

struct SweepCell {
  long labels = 0;
  double q = 0.0;
  double eta = 0.0;
  RunOutcome outcome;
};

struct SweepOutcome {
  std::vector<SweepCell> cells;
  bool trend_ok = true;  // accuracy non-increasing in eta within 1 pooled std
};

// Cross-product of the grid over the mixed task; one subdirectory per cell
// plus a wide-format sweep_summary.csv (one row per (l, q), one accuracy
// column per eta).
SweepOutcome run_sweep(const ExperimentConfig& cfg, const SweepGrid& grid,
                       bool check_trend);

}  // namespace implab

#endif  // IMPLAB_EXPERIMENT_HPP
