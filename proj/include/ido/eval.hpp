#pragma once

#include <span>
#include <string>
#include <vector>

#include "ido/dataset.hpp"
#include "ido/dynamics.hpp"
#include "ido/net.hpp"
#include "ido/trainer.hpp"

namespace ido {

struct ExperimentConfig;  // config.hpp

// Rank-based Mann-Whitney AUC with ties counted as half. Scores are
// suspiciousness (higher = more likely noisy); the noisy class is positive.
double auc(std::span<const double> scores, std::span<const char> noisy_mask);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// Clean-detection quality at a posterior cutoff: predicted-clean is
// tau1 >= thresh; F is 0 when precision and recall are both 0.
Prf prf_at_threshold(std::span<const double> clean_posterior, std::span<const char> noisy_mask,
                     double thresh);

double test_accuracy(const Model& m, const Dataset& test);

// AUC of each dynamics metric at each probe epoch; NaN marks a cell whose
// metric was identical across all samples (nothing to fit or rank).
struct MetricTable {
  std::vector<int> probe_epochs;
  std::vector<std::string> metrics;
  std::vector<std::vector<double>> values;  // [metric][probe]
};

MetricTable compare_metrics(const DynamicsLedger& ledger, std::span<const char> noisy_mask,
                            std::span<const int> probe_epochs);

void write_metric_table_csv(const MetricTable& table, const std::string& path);

struct AblationCell {
  LossCombo combo = LossCombo::full;
  EpsMode eps;
  std::string name;
  std::vector<double> seed_acc;
  double mean_acc = 0.0;
  bool failed = false;
  double max_coeff_dev = 0.0;  // worst |tau1+tau2-1| seen across seeds
  double eps_lo = 1.0;
  double eps_hi = 0.0;
};

// The seven-cell grid: four loss combinations plus the three fixed-eps
// variants of the full loss (fixed 0 coincides with lc+ln, dynamic with
// full).
std::vector<AblationCell> ablation_grid();

// Runs every cell with shared per-seed streams: stage 1 once per seed, then
// one stage-2 variant per cell.
std::vector<AblationCell> ablate(const ExperimentConfig& cfg, int n_seeds);

void write_ablation_csv(const std::vector<AblationCell>& cells, const std::string& path);

}  // namespace ido
