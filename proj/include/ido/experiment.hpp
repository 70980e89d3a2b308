#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ido/config.hpp"
#include "ido/dataset.hpp"
#include "ido/trainer.hpp"

namespace ido {

// Generates (or loads) the train/test pair described by the config. The test
// set is always noise-free.
std::pair<Dataset, Dataset> build_datasets(const ExperimentConfig& cfg);

struct RunReport {
  std::vector<EpochMetrics> epochs;
  int base_epoch = 0;
  double base_test_acc = 0.0;
  double stage1_final_acc = 0.0;
  double final_test_acc = 0.0;
  double coeff_sum_max_dev = 0.0;
  double eps_min = 1.0;
  double eps_max = 0.0;
  std::vector<std::string> warnings;
  std::string out_dir;
  std::string summary_digest;
};

// End-to-end pipeline: data -> noise -> stage 1 -> stage 2 -> artifacts.
// Writes config.json, metrics.csv, weights_final.csv, bank_final.csv,
// ledger.csv, base.ckpt, final.ckpt, summary.json under the run directory.
// Partial metrics are flushed if a stage aborts.
RunReport run_experiment(const ExperimentConfig& cfg);

uint64_t file_digest(const std::string& path);  // FNV-1a over file bytes

}  // namespace ido
