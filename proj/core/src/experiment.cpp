#include "implab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace implab {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + v + "' for " + key);
  }
}

long to_long(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad value '" + v + "' for " + key);
  }
}

// Runs fn(0..n-1) on up to `jobs` worker threads. Each unit must touch only
// its own outputs.
void parallel_for(int jobs, int n, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;
  const int count = std::min(jobs, n);
  for (int w = 0; w < count; ++w)
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        if (failed.load()) return;
        try {
          fn(i);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!failed.exchange(true)) first_error = e.what();
        }
      }
    });
  for (auto& t : workers) t.join();
  if (failed.load()) throw Error(first_error);
}

}  // namespace

TrainConfig ExperimentConfig::train_config(std::uint64_t seed) const {
  TrainConfig tc;
  tc.task = task;
  tc.epochs = epochs;
  tc.batch_size = batch_size;
  tc.lr = lr;
  tc.momentum = momentum;
  tc.weight_decay = weight_decay;
  tc.entropy_weight = entropy_weight;
  tc.weak_noise = weak_noise;
  tc.strong_noise = strong_noise;
  tc.strong_dropout = strong_dropout;
  tc.target_ema = ema;
  tc.noise_scale = noise_scale;
  tc.noise_lr = noise_lr;
  if (arch == "linear")
    tc.arch = Arch::kLinear;
  else if (arch == "mlp")
    tc.arch = Arch::kMlp;
  else
    throw ConfigError("unknown arch '" + arch + "' (expected linear|mlp)");
  tc.hidden = hidden;
  tc.seed = seed;
  return tc;
}

void ExperimentConfig::validate() const {
  train_config(1).validate();
  if (seeds.empty()) throw ConfigError("need at least one seed");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (data_path.empty()) {
    if (num_classes < 2 || dim < 1 || n_train < 1 || n_test < 1)
      throw ConfigError("invalid synthetic dataset dimensions");
  }
  if (q < 0.0 || q > 1.0) throw ConfigError("q must be in [0,1]");
  if (eta < 0.0 || eta > 1.0) throw ConfigError("eta must be in [0,1]");
  if (data_path.empty() &&
      (task == TaskKind::kSsl || task == TaskKind::kMixed)) {
    if (labels <= 0 || labels % num_classes != 0)
      throw ConfigError("label budget " + std::to_string(labels) +
                        " is not divisible by " + std::to_string(num_classes) +
                        " classes");
    if (labels > n_train)
      throw ConfigError("label budget exceeds the training set size");
  }
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "task") cfg.task = parse_task(value);
  else if (key == "C") cfg.num_classes = static_cast<int>(to_long(value, key));
  else if (key == "D") cfg.dim = static_cast<int>(to_long(value, key));
  else if (key == "n_train") cfg.n_train = static_cast<int>(to_long(value, key));
  else if (key == "n_test") cfg.n_test = static_cast<int>(to_long(value, key));
  else if (key == "separation") cfg.separation = to_double(value, key);
  else if (key == "q") cfg.q = to_double(value, key);
  else if (key == "eta") cfg.eta = to_double(value, key);
  else if (key == "labels") cfg.labels = to_long(value, key);
  else if (key == "data") cfg.data_path = value;
  else if (key == "epochs") cfg.epochs = static_cast<int>(to_long(value, key));
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(to_long(value, key));
  else if (key == "lr") cfg.lr = to_double(value, key);
  else if (key == "momentum") cfg.momentum = to_double(value, key);
  else if (key == "weight_decay") cfg.weight_decay = to_double(value, key);
  else if (key == "entropy_weight") cfg.entropy_weight = to_double(value, key);
  else if (key == "weak_noise") cfg.weak_noise = to_double(value, key);
  else if (key == "strong_noise") cfg.strong_noise = to_double(value, key);
  else if (key == "strong_dropout") cfg.strong_dropout = to_double(value, key);
  else if (key == "ema") cfg.ema = to_double(value, key);
  else if (key == "noise_scale") cfg.noise_scale = to_double(value, key);
  else if (key == "noise_lr") cfg.noise_lr = to_double(value, key);
  else if (key == "arch") cfg.arch = value;
  else if (key == "hidden") cfg.hidden = static_cast<int>(to_long(value, key));
  else if (key == "out") cfg.out_dir = value;
  else if (key == "jobs") cfg.jobs = static_cast<int>(to_long(value, key));
  else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& tok : split_list(value))
      if (!tok.empty())
        cfg.seeds.push_back(static_cast<std::uint64_t>(to_long(tok, key)));
    if (cfg.seeds.empty()) throw ConfigError("empty seed list");
  } else if (key == "tool_version") {
    // informational; accepted so manifests reload cleanly
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig load_config_file(const std::string& path,
                                  ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    try {
      apply_config_entry(base, trim(line.substr(0, eq)),
                         trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return base;
}

void write_manifest(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "# resolved run manifest; rerun with --config " << path << "\n";
  out << "tool_version = " << kVersion << "\n";
  out << "task = " << task_name(cfg.task) << "\n";
  out << "C = " << cfg.num_classes << "\n";
  out << "D = " << cfg.dim << "\n";
  out << "n_train = " << cfg.n_train << "\n";
  out << "n_test = " << cfg.n_test << "\n";
  out << "separation = " << fmt17(cfg.separation) << "\n";
  out << "q = " << fmt17(cfg.q) << "\n";
  out << "eta = " << fmt17(cfg.eta) << "\n";
  out << "labels = " << cfg.labels << "\n";
  out << "data = " << cfg.data_path << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "lr = " << fmt17(cfg.lr) << "\n";
  out << "momentum = " << fmt17(cfg.momentum) << "\n";
  out << "weight_decay = " << fmt17(cfg.weight_decay) << "\n";
  out << "entropy_weight = " << fmt17(cfg.entropy_weight) << "\n";
  out << "weak_noise = " << fmt17(cfg.weak_noise) << "\n";
  out << "strong_noise = " << fmt17(cfg.strong_noise) << "\n";
  out << "strong_dropout = " << fmt17(cfg.strong_dropout) << "\n";
  out << "ema = " << fmt17(cfg.ema) << "\n";
  out << "noise_scale = " << fmt17(cfg.noise_scale) << "\n";
  out << "noise_lr = " << fmt17(cfg.noise_lr) << "\n";
  out << "arch = " << cfg.arch << "\n";
  out << "hidden = " << cfg.hidden << "\n";
  out << "seeds = ";
  for (size_t i = 0; i < cfg.seeds.size(); ++i)
    out << (i ? "," : "") << cfg.seeds[i];
  out << "\n";
  out << "out = " << cfg.out_dir << "\n";
  out << "jobs = " << cfg.jobs << "\n";
  if (!out) throw Error("write failed: " + path);
}

// ---------------------------------------------------------------------------

namespace {

Matrix symmetric_transition(int C, double eta) {
  Matrix t(C, C, eta / static_cast<double>(C - 1));
  for (int y = 0; y < C; ++y) t.at(y, y) = 1.0 - eta;
  return t;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  PreparedData out;
  if (!cfg.data_path.empty()) {
    // A loaded dataset is used as-is: it already carries its imprecise
    // annotations. Only the synthetic test set is generated.
    out.train = read_dataset(cfg.data_path);
    out.test = make_blobs(cfg.n_test, out.train.feature_dim(),
                          out.train.num_classes, cfg.separation,
                          rng::derive(seed, 0x7e57));
    return out;
  }

  // Train and test share the class geometry; the sample draws differ.
  const std::uint64_t center_seed = rng::derive(seed, 0xce);
  ImpreciseDataset base =
      make_blobs(cfg.n_train, cfg.dim, cfg.num_classes, cfg.separation,
                 rng::derive(seed, 0xda7a), center_seed);
  out.test = make_blobs(cfg.n_test, cfg.dim, cfg.num_classes, cfg.separation,
                        rng::derive(seed, 0x7e57), center_seed);

  const std::uint64_t cseed = rng::derive(seed, 0xc0bb);
  switch (cfg.task) {
    case TaskKind::kSupervised:
      out.train = std::move(base);
      break;
    case TaskKind::kPll:
      out.train = make_partial(base, cfg.q, cseed);
      break;
    case TaskKind::kSsl:
      out.train = select_labeled_subset(base, cfg.labels, cseed);
      break;
    case TaskKind::kNll:
      out.train = make_symmetric_noise(base, cfg.eta, cseed);
      out.true_transition = symmetric_transition(base.num_classes, cfg.eta);
      break;
    case TaskKind::kMixed:
      out.train = make_mixed(base, cfg.labels, cfg.q, cfg.eta, cseed);
      out.true_transition = symmetric_transition(base.num_classes, cfg.eta);
      break;
  }
  return out;
}

namespace {

void write_summary_json(const std::string& path, const ExperimentConfig& cfg,
                        std::uint64_t seed, double accuracy,
                        const std::vector<MetricsRecord>& metrics) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "{\n";
  out << "  \"task\": \"" << task_name(cfg.task) << "\",\n";
  out << "  \"seed\": " << seed << ",\n";
  out << "  \"arch\": \"" << cfg.arch << "\",\n";
  out << "  \"epochs\": " << cfg.epochs << ",\n";
  out << "  \"test_accuracy\": " << fmt17(accuracy);
  if (!metrics.empty()) {
    out << ",\n  \"final_loss\": " << fmt17(metrics.back().loss_total);
    out << ",\n  \"final_obs_loglik\": " << fmt17(metrics.back().obs_loglik);
  }
  out << "\n}\n";
}

void write_aggregate_json(const std::string& path, const ExperimentConfig& cfg,
                          const RunOutcome& outcome) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "{\n";
  out << "  \"task\": \"" << task_name(cfg.task) << "\",\n";
  out << "  \"seeds\": [";
  for (size_t i = 0; i < cfg.seeds.size(); ++i)
    out << (i ? ", " : "") << cfg.seeds[i];
  out << "],\n";
  out << "  \"accuracies\": [";
  for (size_t i = 0; i < outcome.seed_accuracies.size(); ++i)
    out << (i ? ", " : "") << fmt17(outcome.seed_accuracies[i]);
  out << "],\n";
  out << "  \"mean_acc\": " << fmt17(outcome.mean_acc) << ",\n";
  out << "  \"std_acc\": " << fmt17(outcome.std_acc) << "\n";
  out << "}\n";
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  write_manifest(cfg, cfg.out_dir + "/manifest.cfg");

  const int n_seeds = static_cast<int>(cfg.seeds.size());
  RunOutcome outcome;
  outcome.seed_accuracies.assign(n_seeds, 0.0);

  parallel_for(cfg.jobs, n_seeds, [&](int i) {
    const std::uint64_t seed = cfg.seeds[i];
    const std::string dir =
        cfg.out_dir + "/seed_" + std::to_string(seed);
    fs::create_directories(dir);

    const PreparedData data = prepare_data(cfg, seed);
    const TrainConfig tc = cfg.train_config(seed);
    const TrainResult r =
        train(data.train, data.test, tc,
              data.true_transition ? &*data.true_transition : nullptr);

    const double acc = evaluate(r.model, data.test);
    outcome.seed_accuracies[i] = acc;

    write_metrics_csv(r.metrics, dir + "/metrics.csv");
    write_summary_json(dir + "/summary.json", cfg, seed, acc, r.metrics);
    if (r.noise) {
      std::ofstream tj(dir + "/transition.json");
      if (!tj) throw Error("cannot open for writing: " + dir + "/transition.json");
      tj << transition_to_json(*r.noise) << "\n";
    }
  });

  double mean = 0.0;
  for (double a : outcome.seed_accuracies) mean += a;
  mean /= n_seeds;
  double var = 0.0;
  for (double a : outcome.seed_accuracies) var += (a - mean) * (a - mean);
  outcome.mean_acc = mean;
  outcome.std_acc = n_seeds > 1 ? std::sqrt(var / (n_seeds - 1)) : 0.0;

  write_aggregate_json(cfg.out_dir + "/aggregate.json", cfg, outcome);
  return outcome;
}

// ---------------------------------------------------------------------------

namespace {

std::string format_trimmed(double v) {
  // Short human-facing form for directory names and column headers.
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

SweepOutcome run_sweep(const ExperimentConfig& cfg, const SweepGrid& grid,
                       bool check_trend) {
  if (grid.labels.empty() || grid.qs.empty() || grid.etas.empty())
    throw ConfigError("sweep grid must have at least one l, q, and eta value");
  ExperimentConfig base_cfg = cfg;
  base_cfg.task = TaskKind::kMixed;  // the grid is the mixed parameter space
  fs::create_directories(base_cfg.out_dir);
  write_manifest(base_cfg, base_cfg.out_dir + "/manifest.cfg");

  SweepOutcome outcome;
  for (long l : grid.labels)
    for (double qv : grid.qs)
      for (double ev : grid.etas) {
        SweepCell cell;
        cell.labels = l;
        cell.q = qv;
        cell.eta = ev;
        outcome.cells.push_back(cell);
      }

  const int n_cells = static_cast<int>(outcome.cells.size());
  parallel_for(cfg.jobs, n_cells, [&](int i) {
    SweepCell& cell = outcome.cells[i];
    ExperimentConfig cell_cfg = base_cfg;
    cell_cfg.labels = cell.labels;
    cell_cfg.q = cell.q;
    cell_cfg.eta = cell.eta;
    cell_cfg.jobs = 1;  // parallelism lives at the cell level
    cell_cfg.out_dir = cfg.out_dir + "/cell_l" + std::to_string(cell.labels) +
                       "_q" + format_trimmed(cell.q) + "_eta" +
                       format_trimmed(cell.eta);
    cell.outcome = run_experiment(cell_cfg);
  });

  // Wide summary: one row per (l, q), one column per eta.
  {
    std::ofstream out(cfg.out_dir + "/sweep_summary.csv");
    if (!out) throw Error("cannot open for writing: sweep_summary.csv");
    out << "l,q";
    for (double ev : grid.etas) out << ",eta=" << format_trimmed(ev);
    out << "\n";
    const size_t n_eta = grid.etas.size();
    size_t idx = 0;
    for (long l : grid.labels)
      for (double qv : grid.qs) {
        out << l << "," << format_trimmed(qv);
        for (size_t e = 0; e < n_eta; ++e)
          out << "," << fmt17(outcome.cells[idx + e].outcome.mean_acc);
        out << "\n";
        idx += n_eta;
      }
  }

  if (check_trend) {
    const size_t n_eta = grid.etas.size();
    for (size_t row = 0; row + n_eta <= outcome.cells.size(); row += n_eta) {
      for (size_t e = 0; e + 1 < n_eta; ++e) {
        const RunOutcome& a = outcome.cells[row + e].outcome;
        const RunOutcome& b = outcome.cells[row + e + 1].outcome;
        const double pooled = std::sqrt(
            (a.std_acc * a.std_acc + b.std_acc * b.std_acc) / 2.0);
        if (b.mean_acc > a.mean_acc + pooled) {
          outcome.trend_ok = false;
          std::fprintf(stderr,
                       "trend violation at l=%ld q=%s: eta=%s -> %s rises "
                       "%.4f -> %.4f (pooled std %.4f)\n",
                       outcome.cells[row].labels,
                       format_trimmed(outcome.cells[row].q).c_str(),
                       format_trimmed(grid.etas[e]).c_str(),
                       format_trimmed(grid.etas[e + 1]).c_str(), a.mean_acc,
                       b.mean_acc, pooled);
        }
      }
    }
  }
  return outcome;
}

}  // namespace implab
