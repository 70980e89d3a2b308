#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ido/trainer.hpp"

namespace ido {

// Resolved experiment configuration. Parsed strictly: unknown keys are
// rejected with their full path, every field has a default, and the resolved
// form is echoed into the run directory.
struct ExperimentConfig {
  struct DatasetSection {
    std::string kind = "gaussian";  // gaussian | csv
    int k = 4;
    int n_per_class = 1000;
    int test_per_class = 250;
    int d = 2;
    double sep = 6.0;
    double spread = 1.0;
    std::string train_csv;
    std::string test_csv;
    std::optional<uint64_t> seed;  // default: derived from the master seed
  } dataset;

  struct NoiseSection {
    std::string kind = "sym";  // sym | asym | inst | none
    double eta = 0.4;
    std::optional<uint64_t> seed;
  } noise;

  struct ModelSection {
    std::vector<int> hidden{64, 64};
  } model;

  struct TrainSection {
    int stage1_epochs = 30;
    int stage2_epochs = 30;
    int batch_size = 64;
    double lr = 0.05;
    double momentum = 0.9;
    double weak_sigma = 0.05;
    double strong_sigma = 0.2;
    double strong_dropout = 0.1;
    int bmm_warm_iters = 2;
    int bmm_max_iters = 50;
    double bmm_tol = 1e-6;
    int fkl_k = 2;
    double ema_beta = 0.7;
    std::string loss_combo = "full";  // lc | lc+ln | lc+lsim | full
    std::string eps_mode = "dynamic";  // dynamic | fixed
    double eps_fixed = 0.25;
    bool retain_history = false;
  } train;

  struct EvalSection {
    std::vector<int> probe_epochs{5, 10, 20};
    std::vector<double> thresholds{0.2, 0.5, 0.8};
    int ablate_seeds = 3;
  } eval;

  struct OutputSection {
    std::string dir = "runs/out";
  } output;

  uint64_t seed = 1;

  TrainConfig train_config() const;  // maps train+model sections, validated
  void validate() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text, const std::string& origin);
std::string resolved_config_json(const ExperimentConfig& cfg);

}  // namespace ido
