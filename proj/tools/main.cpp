#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ido/betamix.hpp"
#include "ido/config.hpp"
#include "ido/csvio.hpp"
#include "ido/datagen.hpp"
#include "ido/errors.hpp"
#include "ido/eval.hpp"
#include "ido/experiment.hpp"
#include "ido/rng.hpp"
#include "ido/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  bool force = false;
};

ido::ExperimentConfig resolve_config(const GlobalOpts& g) {
  ido::ExperimentConfig cfg;
  if (!g.config_path.empty()) cfg = ido::load_config(g.config_path);
  if (!g.out_dir.empty()) cfg.output.dir = g.out_dir;
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

// Fresh-run-directory discipline: refuse to write into a non-empty directory
// unless --force is given.
void claim_out_dir(const std::string& dir, bool force) {
  const fs::path p(dir);
  if (fs::exists(p) && !fs::is_empty(p) && !force)
    throw ido::io_error("output directory " + dir + " already exists; use --force to overwrite");
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ido::io_error("cannot create output directory: " + dir);
}

int cmd_gen(const GlobalOpts& g) {
  ido::ExperimentConfig cfg = resolve_config(g);
  claim_out_dir(cfg.output.dir, g.force);
  const auto [train, test] = ido::build_datasets(cfg);
  const fs::path dir(cfg.output.dir);
  ido::save_csv(train, (dir / "train.csv").string());
  if (test.size()) ido::save_csv(test, (dir / "test.csv").string());
  {
    std::ofstream out(dir / "config.json");
    if (!out) throw ido::io_error("cannot write config echo");
    out << ido::resolved_config_json(cfg);
  }
  std::cout << "wrote " << (dir / "train.csv").string() << " (" << train.size() << " rows, "
            << train.noisy_count() << " noisy)";
  if (test.size()) std::cout << " and test.csv (" << test.size() << " rows)";
  std::cout << "\n";
  return 0;
}

int cmd_train(const GlobalOpts& g, bool stage1_only) {
  ido::ExperimentConfig cfg = resolve_config(g);
  if (stage1_only) cfg.train.stage2_epochs = 0;
  claim_out_dir(cfg.output.dir, g.force);
  const ido::RunReport report = ido::run_experiment(cfg);
  std::cout << "run complete: " << report.out_dir << "\n"
            << "  base epoch       " << report.base_epoch << "\n"
            << "  base test acc    " << report.base_test_acc << "\n"
            << "  final test acc   " << report.final_test_acc << "\n"
            << "  summary digest   " << report.summary_digest << "\n";
  for (const auto& w : report.warnings) std::cout << "  warning: " << w << "\n";
  return 0;
}

int cmd_fit(const GlobalOpts& g, const std::string& values_csv, const std::string& init_spec,
            int max_iters) {
  // single-column file of values in (0,1); a `value` header row is optional
  std::ifstream in(values_csv);
  if (!in) throw ido::io_error("cannot open file: " + values_csv);
  std::vector<double> values;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && (line == "value" || line == "values" || line == "w")) continue;
    double v = 0.0;
    try {
      v = std::stod(line);
    } catch (const std::exception&) {
      throw ido::parse_error(values_csv + ": line " + std::to_string(line_no) +
                             ": non-numeric value '" + line + "'");
    }
    if (!(v > 0.0) || !(v < 1.0))
      throw std::domain_error(values_csv + ": line " + std::to_string(line_no) +
                              ": value " + line + " outside (0,1)");
    values.push_back(v);
  }

  ido::BetaMixture init = ido::default_init();
  if (!init_spec.empty()) {
    const auto parts = ido::split_csv_line(init_spec);
    if (parts.size() != 4) throw ido::config_error("--init expects a1,b1,a2,b2");
    init.comp1 = {std::stod(parts[0]), std::stod(parts[1])};
    init.comp2 = {std::stod(parts[2]), std::stod(parts[3])};
  }
  std::cout << "init: Beta(" << init.comp1.alpha << "," << init.comp1.beta << ") / Beta("
            << init.comp2.alpha << "," << init.comp2.beta << "), weights (" << init.w1 << ","
            << init.w2 << ")\n";

  const ido::BetaMixture fit = ido::fit_bmm(values, init, {max_iters, 1e-6});
  std::cout << "fitted: m1=" << fit.w1 << " Beta(" << fit.comp1.alpha << "," << fit.comp1.beta
            << ")  m2=" << fit.w2 << " Beta(" << fit.comp2.alpha << "," << fit.comp2.beta
            << ")\n";
  std::cout << "value,tau1,eps,tau2\n";
  for (double v : values) {
    const auto [t1, t2] = ido::posterior(fit, v);
    std::cout << ido::format_double(v) << "," << ido::format_double(t1) << ","
              << ido::format_double(ido::difficulty(fit, v)) << "," << ido::format_double(t2)
              << "\n";
  }
  if (!g.out_dir.empty()) {
    claim_out_dir(g.out_dir, g.force);
    ido::MixtureBank bank;
    bank.per_class = {fit};
    bank.fallback = fit;
    bank.fallback_used = {0};
    ido::export_bank_csv(bank, (fs::path(g.out_dir) / "fit.csv").string());
  }
  return 0;
}

int cmd_compare(const GlobalOpts& g) {
  ido::ExperimentConfig cfg = resolve_config(g);
  claim_out_dir(cfg.output.dir, g.force);

  int max_probe = 1;
  for (int p : cfg.eval.probe_epochs) max_probe = std::max(max_probe, p);
  ido::TrainConfig tc = cfg.train_config();
  tc.stage1_epochs = max_probe;
  tc.stage2_epochs = 0;
  tc.retain_history = true;

  const auto [train, test] = ido::build_datasets(cfg);
  if (!train.has_oracle || train.noisy_count() == 0 || train.noisy_count() == train.size())
    throw ido::eval_error("compare: needs an oracle with both clean and noisy samples");

  const ido::Stage1Result s1 = ido::stage1(tc, train, test);
  const auto mask = train.noise_mask();
  const ido::MetricTable table = ido::compare_metrics(s1.ledger, mask, cfg.eval.probe_epochs);
  const fs::path out = fs::path(cfg.output.dir) / "compare.csv";
  ido::write_metric_table_csv(table, out.string());
  std::cout << "wrote " << out.string() << "\n";
  for (size_t m = 0; m < table.metrics.size(); ++m) {
    std::cout << "  " << table.metrics[m] << ":";
    for (double v : table.values[m]) {
      if (std::isnan(v))
        std::cout << " -";
      else
        std::cout << " " << v;
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_ablate(const GlobalOpts& g) {
  ido::ExperimentConfig cfg = resolve_config(g);
  claim_out_dir(cfg.output.dir, g.force);
  const auto cells = ido::ablate(cfg, cfg.eval.ablate_seeds);
  const fs::path out = fs::path(cfg.output.dir) / "ablation.csv";
  ido::write_ablation_csv(cells, out.string());
  std::cout << "wrote " << out.string() << "\n";
  for (const auto& c : cells)
    std::cout << "  " << c.name << ": mean acc " << c.mean_acc << (c.failed ? " (failed)" : "")
              << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const fs::path summary_path = dir / "summary.json";
  std::ifstream in(summary_path);
  if (!in) throw ido::io_error("no summary.json under " + run_dir);
  nlohmann::json summary;
  try {
    in >> summary;
  } catch (const nlohmann::json::exception& e) {
    throw ido::parse_error(summary_path.string() + ": " + e.what());
  }
  std::cout << "run report for " << run_dir << "\n" << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ido: noisy-label learning with wrong-event difficulty modeling"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config (JSON)");
  app.add_option("--out", g.out_dir, "output directory (overrides config)");
  uint64_t seed_arg = 0;
  auto* seed_opt = app.add_option("--seed", seed_arg, "master seed (overrides config)");
  app.add_flag("--force", g.force, "allow writing into a non-empty output directory");

  auto* gen = app.add_subcommand("gen", "generate train/test CSVs with injected noise");
  bool stage1_only = false;
  auto* train = app.add_subcommand("train", "run the two-stage training pipeline");
  train->add_flag("--stage1-only", stage1_only, "stop after stage 1");
  std::string fit_values, fit_init;
  int fit_iters = 50;
  auto* fitc = app.add_subcommand("fit", "fit a beta mixture to a column of values");
  fitc->add_option("values", fit_values, "CSV with one value in (0,1) per line")->required();
  fitc->add_option("--init", fit_init, "a1,b1,a2,b2 initial shapes");
  fitc->add_option("--iters", fit_iters, "EM iteration budget");
  auto* compare = app.add_subcommand("compare", "AUC table of dynamics metrics at probe epochs");
  auto* ablate = app.add_subcommand("ablate", "loss-combination and fixed-eps grid");
  std::string report_dir;
  auto* report = app.add_subcommand("report", "print the summary of a finished run");
  report->add_option("dir", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed_arg;

  try {
    if (gen->parsed()) return cmd_gen(g);
    if (train->parsed()) return cmd_train(g, stage1_only);
    if (fitc->parsed()) return cmd_fit(g, fit_values, fit_init, fit_iters);
    if (compare->parsed()) return cmd_compare(g);
    if (ablate->parsed()) return cmd_ablate(g);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const ido::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ido::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 1;
  } catch (const ido::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
