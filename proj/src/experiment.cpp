#include "ido/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ido/csvio.hpp"
#include "ido/datagen.hpp"
#include "ido/errors.hpp"
#include "ido/eval.hpp"
#include "ido/rng.hpp"

namespace ido {

namespace fs = std::filesystem;

std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& cfg) {
  Dataset train, test;
  if (cfg.dataset.kind == "csv") {
    train = load_csv(cfg.dataset.train_csv);
    if (!cfg.dataset.test_csv.empty()) test = load_csv(cfg.dataset.test_csv);
    if (test.size() && test.n_classes < train.n_classes) test.n_classes = train.n_classes;
    return {std::move(train), std::move(test)};
  }

  const auto& d = cfg.dataset;
  const uint64_t data_seed = d.seed ? *d.seed : derive_seed(cfg.seed, "datagen");
  train = make_gaussian_clusters(d.k, d.n_per_class, d.d, d.sep, d.spread, data_seed);
  if (d.test_per_class > 0)
    test = make_gaussian_clusters(d.k, d.test_per_class, d.d, d.sep, d.spread,
                                  derive_seed(data_seed, "test-split"));

  const uint64_t noise_seed = cfg.noise.seed ? *cfg.noise.seed : derive_seed(cfg.seed, "noise");
  if (cfg.noise.kind == "sym")
    train = apply_transition(train, symmetric_noise_matrix(d.k, cfg.noise.eta), noise_seed);
  else if (cfg.noise.kind == "asym")
    train = apply_transition(train, asymmetric_noise_matrix(d.k, cfg.noise.eta), noise_seed);
  else if (cfg.noise.kind == "inst")
    train = instance_noise(train, cfg.noise.eta, noise_seed);
  return {std::move(train), std::move(test)};
}

uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file for digest: " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

namespace {

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_metrics_csv(const std::vector<EpochMetrics>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write file: " + path);
  out << "epoch,stage,train_loss,test_acc,label_wave,auc_we,auc_loss\n";
  for (const auto& r : rows) {
    out << r.epoch << "," << r.stage << "," << format_double(r.train_loss) << ","
        << format_double(r.test_acc) << ",";
    if (r.label_wave >= 0) out << r.label_wave;
    out << ",";
    if (r.auc_we >= 0.0) out << format_double(r.auc_we);
    out << ",";
    if (r.auc_loss >= 0.0) out << format_double(r.auc_loss);
    out << "\n";
  }
  if (!out) throw io_error("write failed: " + path);
}

void write_weights_csv(const Stage2Result& s2, const Dataset& train, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write file: " + path);
  const auto mask = train.noise_mask();
  out << "idx,class,w_norm,tau1,eps,tau2,is_noisy\n";
  for (size_t i = 0; i < s2.final_weights.size(); ++i) {
    const auto& wt = s2.final_weights[i];
    out << i << "," << train.given_labels[i] << "," << format_double(s2.final_wnorm[i]) << ","
        << format_double(wt.tau1) << "," << format_double(wt.eps) << ","
        << format_double(wt.tau2) << "," << static_cast<int>(mask[i]) << "\n";
  }
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path dir(cfg.output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create run directory: " + dir.string());

  {
    std::ofstream out(dir / "config.json");
    if (!out) throw io_error("cannot write config echo: " + (dir / "config.json").string());
    out << resolved_config_json(cfg);
  }

  auto [train, test] = build_datasets(cfg);
  const TrainConfig tc = cfg.train_config();

  RunReport report;
  report.out_dir = dir.string();

  std::vector<EpochMetrics> all_metrics;
  nlohmann::json prf_rows = nlohmann::json::array();
  try {
    Stage1Result s1 = stage1(tc, train, test);
    all_metrics = s1.metrics;
    report.base_epoch = s1.base_epoch;
    if (test.size()) {
      report.base_test_acc = test_accuracy(s1.base, test);
      report.stage1_final_acc = test_accuracy(s1.final_model, test);
    }
    save_checkpoint(s1.base, (dir / "base.ckpt").string());

    Model final_model = s1.final_model;
    if (tc.stage2_epochs > 0) {
      Stage2Result s2 = stage2(tc, train, test, s1.base, s1.ledger);
      all_metrics.insert(all_metrics.end(), s2.metrics.begin(), s2.metrics.end());
      report.coeff_sum_max_dev = s2.coeff_sum_max_dev;
      report.eps_min = s2.eps_min;
      report.eps_max = s2.eps_max;
      report.warnings = s2.warnings;
      final_model = s2.model;
      write_weights_csv(s2, train, (dir / "weights_final.csv").string());
      export_bank_csv(s2.final_bank, (dir / "bank_final.csv").string());
      if (train.has_oracle && train.noisy_count() > 0 &&
          train.noisy_count() < train.size()) {
        const auto mask = train.noise_mask();
        std::vector<double> tau1(s2.final_weights.size());
        for (size_t i = 0; i < tau1.size(); ++i) tau1[i] = s2.final_weights[i].tau1;
        for (double t : cfg.eval.thresholds) {
          const Prf prf = prf_at_threshold(tau1, mask, t);
          prf_rows.push_back({{"threshold", t},
                              {"precision", prf.precision},
                              {"recall", prf.recall},
                              {"f_score", prf.f}});
        }
      }
    }
    save_checkpoint(final_model, (dir / "final.ckpt").string());
    report.final_test_acc = test.size() ? test_accuracy(final_model, test) : 0.0;
    report.epochs = all_metrics;
    write_metrics_csv(all_metrics, (dir / "metrics.csv").string());
    const auto mask = train.noise_mask();
    s1.ledger.export_csv((dir / "ledger.csv").string(), train.has_oracle ? &mask : nullptr);
  } catch (...) {
    // keep whatever finished for debugging, then surface the failure
    if (!all_metrics.empty()) write_metrics_csv(all_metrics, (dir / "metrics.csv").string());
    throw;
  }

  nlohmann::json summary;
  summary["base_epoch"] = report.base_epoch;
  summary["base_test_acc"] = report.base_test_acc;
  summary["stage1_final_acc"] = report.stage1_final_acc;
  summary["final_test_acc"] = report.final_test_acc;
  summary["stage1_epochs"] = tc.stage1_epochs;
  summary["stage2_epochs"] = tc.stage2_epochs;
  summary["coeff_sum_max_dev"] = report.coeff_sum_max_dev;
  summary["warnings"] = report.warnings;
  summary["checkpoints"] = {{"base", "base.ckpt"}, {"final", "final.ckpt"}};
  if (tc.stage2_epochs > 0) {
    summary["eps_min"] = report.eps_min;
    summary["eps_max"] = report.eps_max;
  }
  if (!all_metrics.empty() && all_metrics.back().auc_we >= 0.0) {
    summary["final_auc_we"] = all_metrics.back().auc_we;
    summary["final_auc_loss"] = all_metrics.back().auc_loss;
  }
  if (!prf_rows.empty()) summary["clean_detection"] = prf_rows;

  nlohmann::json digests;
  digests["config"] = hex64(file_digest((dir / "config.json").string()));
  digests["metrics"] = hex64(file_digest((dir / "metrics.csv").string()));
  digests["base_ckpt"] = hex64(file_digest((dir / "base.ckpt").string()));
  digests["final_ckpt"] = hex64(file_digest((dir / "final.ckpt").string()));
  if (tc.stage2_epochs > 0) {
    digests["weights"] = hex64(file_digest((dir / "weights_final.csv").string()));
    digests["bank"] = hex64(file_digest((dir / "bank_final.csv").string()));
  }
  uint64_t overall = 0xcbf29ce484222325ull;
  for (const auto& [_, v] : digests.items())
    overall = splitmix64(overall ^ fnv1a64(v.get<std::string>()));
  digests["overall"] = hex64(overall);
  summary["digests"] = digests;
  report.summary_digest = digests["overall"].get<std::string>();

  {
    std::ofstream out(dir / "summary.json");
    if (!out) throw io_error("cannot write summary: " + (dir / "summary.json").string());
    out << summary.dump(2) << "\n";
  }
  return report;
}

}  // namespace ido
