#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "implab/experiment.hpp"

using namespace implab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(TaskKind task, const std::string& out) {
  ExperimentConfig cfg;
  cfg.task = task;
  cfg.num_classes = 3;
  cfg.dim = 4;
  cfg.n_train = 30;
  cfg.n_test = 30;
  cfg.labels = 30;
  cfg.q = 0.4;
  cfg.eta = 0.2;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.out_dir = out;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag)
      : path(fs::temp_directory_path() / tag) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("run_experiment: emits the declared per-seed files") {
  TempDir tmp("implab_exp_run");
  auto cfg = tiny_config(TaskKind::kPll, tmp.path.string());
  cfg.seeds = {1, 2, 3};

  const auto outcome = run_experiment(cfg);
  CHECK(outcome.seed_accuracies.size() == 3);

  CHECK(fs::exists(tmp.path / "manifest.cfg"));
  CHECK(fs::exists(tmp.path / "aggregate.json"));
  for (int s : {1, 2, 3}) {
    const fs::path dir = tmp.path / ("seed_" + std::to_string(s));
    CHECK(fs::exists(dir / "metrics.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK_FALSE(fs::exists(dir / "transition.json"));  // no noise model in pll
  }

  const std::string agg = slurp((tmp.path / "aggregate.json").string());
  CHECK(agg.find("\"mean_acc\"") != std::string::npos);
  CHECK(agg.find("\"std_acc\"") != std::string::npos);
}

TEST_CASE("run_experiment: noise tasks dump the learned transition") {
  TempDir tmp("implab_exp_nll");
  auto cfg = tiny_config(TaskKind::kNll, tmp.path.string());
  cfg.seeds = {4};
  run_experiment(cfg);
  CHECK(fs::exists(tmp.path / "seed_4" / "transition.json"));
}

TEST_CASE("run_experiment: every emitted JSON file actually parses") {
  TempDir tmp("implab_exp_json");
  auto cfg = tiny_config(TaskKind::kNll, tmp.path.string());
  cfg.seeds = {1, 2};
  const auto outcome = run_experiment(cfg);

  const auto agg =
      nlohmann::json::parse(slurp((tmp.path / "aggregate.json").string()));
  CHECK(agg.at("task") == "nll");
  CHECK(agg.at("accuracies").size() == 2);
  CHECK(agg.at("mean_acc").get<double>() ==
        doctest::Approx(outcome.mean_acc).epsilon(1e-12));

  for (int s : {1, 2}) {
    const fs::path dir = tmp.path / ("seed_" + std::to_string(s));
    const auto summary =
        nlohmann::json::parse(slurp((dir / "summary.json").string()));
    CHECK(summary.at("seed") == s);
    CHECK(summary.at("test_accuracy").is_number());

    const auto transition =
        nlohmann::json::parse(slurp((dir / "transition.json").string()));
    CHECK(transition.at("C") == 3);
    const auto rows = transition.at("T");
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
      double sum = 0.0;
      for (const auto& v : row) sum += v.get<double>();
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("run_experiment: untrained supervised model scores 1/C") {
  TempDir tmp("implab_exp_zero");
  auto cfg = tiny_config(TaskKind::kSupervised, tmp.path.string());
  cfg.epochs = 0;
  cfg.seeds = {1, 2, 3};
  const auto outcome = run_experiment(cfg);
  CHECK(outcome.mean_acc == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("run_experiment: manifest rerun reproduces metrics byte for byte") {
  TempDir tmp_a("implab_exp_a");
  TempDir tmp_b("implab_exp_b");
  auto cfg = tiny_config(TaskKind::kMixed, tmp_a.path.string());
  cfg.labels = 15;
  cfg.seeds = {1, 2};
  run_experiment(cfg);

  auto again =
      load_config_file((tmp_a.path / "manifest.cfg").string(), {});
  again.out_dir = tmp_b.path.string();
  run_experiment(again);

  for (int s : {1, 2}) {
    const std::string rel = "seed_" + std::to_string(s) + "/metrics.csv";
    CHECK(slurp((tmp_a.path / rel).string()) ==
          slurp((tmp_b.path / rel).string()));
  }
}

TEST_CASE("config parsing: precedence, lists, and unknown keys") {
  TempDir tmp("implab_exp_cfg");
  fs::create_directories(tmp.path);
  const std::string path = (tmp.path / "test.cfg").string();
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "task = nll\n";
    out << "eta = 0.35   # trailing comment\n";
    out << "seeds = 7,8\n";
  }
  ExperimentConfig defaults;
  const auto loaded = load_config_file(path, defaults);
  CHECK(loaded.task == TaskKind::kNll);
  CHECK(loaded.eta == doctest::Approx(0.35));
  CHECK(loaded.seeds == std::vector<std::uint64_t>{7, 8});
  CHECK(loaded.epochs == defaults.epochs);  // untouched keys keep defaults

  ExperimentConfig cfg;
  CHECK_THROWS_AS(apply_config_entry(cfg, "no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "eta", "abc"), ConfigError);

  {
    std::ofstream out(path);
    out << "this line has no equals sign\n";
  }
  CHECK_THROWS_AS(load_config_file(path, {}), ConfigError);
}

TEST_CASE("run_sweep: grid shape, summary layout, trend bookkeeping") {
  TempDir tmp("implab_exp_sweep");
  auto cfg = tiny_config(TaskKind::kMixed, tmp.path.string());
  cfg.seeds = {1, 2};
  cfg.epochs = 1;

  SweepGrid grid;
  grid.labels = {15, 30};
  grid.qs = {0.2};
  grid.etas = {0.0, 0.3};

  const auto outcome = run_sweep(cfg, grid, /*check_trend=*/false);
  CHECK(outcome.cells.size() == 4);
  CHECK(fs::exists(tmp.path / "sweep_summary.csv"));
  CHECK(fs::exists(tmp.path / "cell_l15_q0.2_eta0" / "aggregate.json"));
  CHECK(fs::exists(tmp.path / "cell_l30_q0.2_eta0.3" / "seed_1" / "metrics.csv"));

  const std::string summary = slurp((tmp.path / "sweep_summary.csv").string());
  std::istringstream lines(summary);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "l,q,eta=0,eta=0.3");
  int rows = 0;
  std::string row;
  while (std::getline(lines, row))
    if (!row.empty()) ++rows;
  CHECK(rows == 2);  // one per (l, q)
}

TEST_CASE("run_sweep: single-cell grid behaves like one run plus a summary") {
  TempDir tmp("implab_exp_sweep1");
  auto cfg = tiny_config(TaskKind::kMixed, tmp.path.string());
  cfg.seeds = {3};
  SweepGrid grid;
  grid.labels = {15};
  grid.qs = {0.4};
  grid.etas = {0.2};
  const auto outcome = run_sweep(cfg, grid, false);
  CHECK(outcome.cells.size() == 1);
  CHECK(outcome.trend_ok);
  CHECK(fs::exists(tmp.path / "cell_l15_q0.4_eta0.2" / "seed_3" / "metrics.csv"));
  CHECK(fs::exists(tmp.path / "sweep_summary.csv"));
}

TEST_CASE("run_experiment: parallel seeds write identical bytes") {
  TempDir tmp_a("implab_exp_j1");
  TempDir tmp_b("implab_exp_j2");
  auto cfg = tiny_config(TaskKind::kPll, tmp_a.path.string());
  cfg.seeds = {1, 2, 3, 4};
  run_experiment(cfg);
  cfg.out_dir = tmp_b.path.string();
  cfg.jobs = 3;
  run_experiment(cfg);
  for (int s = 1; s <= 4; ++s) {
    const std::string rel = "seed_" + std::to_string(s) + "/metrics.csv";
    CHECK(slurp((tmp_a.path / rel).string()) ==
          slurp((tmp_b.path / rel).string()));
  }
}

TEST_CASE("prepare_data: per-task corruption and known transitions") {
  ExperimentConfig cfg = tiny_config(TaskKind::kNll, "unused");
  const auto nll = prepare_data(cfg, 5);
  CHECK(nll.true_transition.has_value());
  CHECK(nll.true_transition->at(0, 0) == doctest::Approx(0.8));
  int noisy = 0;
  for (const auto& info : nll.train.infos)
    if (info.kind == LabelInfo::Kind::kNoisy) ++noisy;
  CHECK(noisy == static_cast<int>(nll.train.size()));

  cfg.task = TaskKind::kSsl;
  cfg.labels = 6;
  const auto ssl = prepare_data(cfg, 5);
  int exact = 0;
  for (const auto& info : ssl.train.infos)
    if (info.kind == LabelInfo::Kind::kExact) ++exact;
  CHECK(exact == 6);
  CHECK_FALSE(ssl.true_transition.has_value());
}
