#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ido/config.hpp"
#include "ido/dataset.hpp"
#include "ido/errors.hpp"
#include "ido/experiment.hpp"

using namespace ido;
namespace fs = std::filesystem;

namespace {

std::string smoke_config_text(const std::string& out_dir, int s1 = 8, int s2 = 6) {
  std::ostringstream os;
  os << R"({
  "dataset": {"k": 3, "n_per_class": 100, "test_per_class": 40, "d": 2, "sep": 6.0, "spread": 1.5},
  "noise": {"kind": "sym", "eta": 0.4},
  "train": {"stage1_epochs": )"
     << s1 << R"(, "stage2_epochs": )" << s2
     << R"(, "batch_size": 32, "lr": 0.1},
  "model": {"hidden": [16, 16]},
  "output": {"dir": ")"
     << out_dir << R"("},
  "seed": 9
})";
  return os.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(IDO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing: defaults, strict keys, value errors") {
  const ExperimentConfig defaults = parse_config_json("{}", "inline");
  CHECK(defaults.dataset.k == 4);
  CHECK(defaults.train.stage1_epochs == 30);
  CHECK(defaults.train.ema_beta == doctest::Approx(0.7));
  CHECK(defaults.eval.thresholds.size() == 3);

  try {
    parse_config_json(R"({"train": {"learning_rate": 0.1}})", "inline");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("train.learning_rate") != std::string::npos);
  }

  try {
    parse_config_json(R"({"noise": {"eta": "lots"}})", "inline");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("noise.eta") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_config_json(R"({"noise": {"eta": 1.5}})", "inline"), config_error);
  CHECK_THROWS_AS(parse_config_json(R"({"train": {"loss_combo": "everything"}})", "inline"),
                  config_error);
  CHECK_THROWS_AS(parse_config_json("{not json", "inline"), parse_error);

  // resolved echo parses back to the same values
  ExperimentConfig cfg = defaults;
  cfg.train.stage2_epochs = 3;
  cfg.seed = 123;
  const ExperimentConfig back = parse_config_json(resolved_config_json(cfg), "echo");
  CHECK(back.train.stage2_epochs == 3);
  CHECK(back.seed == 123);
  CHECK(back.dataset.sep == cfg.dataset.sep);
}

TEST_CASE("config: eps mode mapping") {
  const auto fixed = parse_config_json(
      R"({"train": {"eps_mode": "fixed", "eps_fixed": 0.5}})", "inline");
  const TrainConfig tc = fixed.train_config();
  CHECK_FALSE(tc.eps_mode.dynamic);
  CHECK(tc.eps_mode.fixed == 0.5);
}

TEST_CASE("run_experiment produces the full run-directory contract") {
  const auto dir = fs::temp_directory_path() / "ido_cli_run";
  fs::remove_all(dir);
  ExperimentConfig cfg = parse_config_json(smoke_config_text((dir / "a").string()), "inline");

  const RunReport report = run_experiment(cfg);
  for (const char* name : {"config.json", "metrics.csv", "weights_final.csv", "bank_final.csv",
                           "base.ckpt", "final.ckpt", "summary.json", "ledger.csv"}) {
    CHECK(fs::exists(dir / "a" / name));
  }
  CHECK(report.epochs.size() == 8 + 6);
  CHECK(report.final_test_acc > 0.5);
  CHECK(!report.summary_digest.empty());

  // same config + seed into a fresh directory: identical digest
  ExperimentConfig cfg2 = cfg;
  cfg2.output.dir = (dir / "b").string();
  const RunReport repeat = run_experiment(cfg2);
  CHECK(repeat.summary_digest == report.summary_digest);

  // different seed: different digest
  ExperimentConfig cfg3 = cfg;
  cfg3.output.dir = (dir / "c").string();
  cfg3.seed = 10;
  const RunReport other = run_experiment(cfg3);
  CHECK(other.summary_digest != report.summary_digest);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment with stage2_epochs=0 reports stage-1 only") {
  const auto dir = fs::temp_directory_path() / "ido_cli_s1only";
  fs::remove_all(dir);
  ExperimentConfig cfg =
      parse_config_json(smoke_config_text((dir / "run").string(), 6, 0), "inline");
  const RunReport report = run_experiment(cfg);
  CHECK(report.epochs.size() == 6);
  CHECK_FALSE(fs::exists(dir / "run" / "weights_final.csv"));
  CHECK_FALSE(fs::exists(dir / "run" / "bank_final.csv"));
  const std::string summary = slurp(dir / "run" / "summary.json");
  CHECK(summary.find("eps_min") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli process: gen, overwrite refusal, train, report, exit codes") {
  const auto dir = fs::temp_directory_path() / "ido_cli_proc";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg_path = (dir / "smoke.json").string();
  {
    std::ofstream out(cfg_path);
    out << smoke_config_text((dir / "gen_out").string(), 5, 3);
  }

  CHECK(run_cli("gen --config " + cfg_path) == 0);
  CHECK(fs::exists(dir / "gen_out" / "train.csv"));
  CHECK(fs::exists(dir / "gen_out" / "test.csv"));

  // noise fraction for K=3, eta=0.4 symmetric: eta*(K-1)/K = 4/15
  const Dataset train = load_csv((dir / "gen_out" / "train.csv").string());
  CHECK(train.size() == 300);
  const double frac = static_cast<double>(train.noisy_count()) / train.size();
  CHECK(frac == doctest::Approx(0.4 * 2.0 / 3.0).epsilon(0.35));

  // refuses to overwrite without --force, allows with it
  CHECK(run_cli("gen --config " + cfg_path) == 3);
  CHECK(run_cli("gen --config " + cfg_path + " --force") == 0);

  // identical seeds produce identical files
  const std::string first = slurp(dir / "gen_out" / "train.csv");
  CHECK(run_cli("gen --config " + cfg_path + " --force") == 0);
  CHECK(slurp(dir / "gen_out" / "train.csv") == first);

  CHECK(run_cli("train --config " + cfg_path + " --out " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "summary.json"));
  CHECK(run_cli("report " + (dir / "run").string()) == 0);

  // stage1-only run drops the stage-2 artifacts
  CHECK(run_cli("train --stage1-only --config " + cfg_path + " --out " +
                (dir / "run_s1").string()) == 0);
  CHECK_FALSE(fs::exists(dir / "run_s1" / "weights_final.csv"));

  // validation failures name the key and exit 1
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"train": {"stage1_epoch": 5}})";
  }
  CHECK(run_cli("train --config " + (dir / "bad.json").string()) == 1);
  CHECK(run_cli("report " + (dir / "nosuch").string()) == 3);
  fs::remove_all(dir);
}

TEST_CASE("cli process: fit command") {
  const auto dir = fs::temp_directory_path() / "ido_cli_fit";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "values.csv");
    out << "value\n";
    // two beta-ish lobes
    for (int i = 0; i < 60; ++i) out << 0.02 + 0.003 * (i % 40) << "\n";
    for (int i = 0; i < 40; ++i) out << 0.75 + 0.005 * (i % 30) << "\n";
  }
  CHECK(run_cli("fit " + (dir / "values.csv").string()) == 0);

  {
    std::ofstream out(dir / "constant.csv");
    for (int i = 0; i < 50; ++i) out << "0.42\n";
  }
  CHECK(run_cli("fit " + (dir / "constant.csv").string()) == 2);  // degenerate fit

  {
    std::ofstream out(dir / "oob.csv");
    out << "0.5\n1.5\n";
  }
  CHECK(run_cli("fit " + (dir / "oob.csv").string()) == 1);  // domain error names the row
  fs::remove_all(dir);
}

TEST_CASE("cli process: compare command emits the metric table") {
  const auto dir = fs::temp_directory_path() / "ido_cli_cmp";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg_path = (dir / "cmp.json").string();
  {
    std::ofstream out(cfg_path);
    out << R"({
  "dataset": {"k": 3, "n_per_class": 80, "test_per_class": 20, "d": 2, "sep": 6.0, "spread": 1.5},
  "noise": {"kind": "sym", "eta": 0.4},
  "train": {"batch_size": 32, "lr": 0.1},
  "model": {"hidden": [16, 16]},
  "eval": {"probe_epochs": [2, 5]},
  "output": {"dir": ")" << (dir / "out").string() << R"("},
  "seed": 4
})";
  }
  CHECK(run_cli("compare --config " + cfg_path) == 0);
  const std::string table = slurp(dir / "out" / "compare.csv");
  CHECK(table.find("metric,epoch_2,epoch_5") == 0);
  CHECK(table.find("wrong_event") != std::string::npos);
  fs::remove_all(dir);
}
