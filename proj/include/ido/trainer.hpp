#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ido/betamix.hpp"
#include "ido/dataset.hpp"
#include "ido/dynamics.hpp"
#include "ido/net.hpp"

namespace ido {

// Per-sample stage-2 coefficients: clean posterior, difficulty, noisy
// posterior. tau1 + tau2 == 1.
struct WeightTriple {
  double tau1 = 1.0;
  double eps = 0.0;
  double tau2 = 0.0;
};

enum class LossCombo { lc_only, lc_ln, lc_lsim, full };
const char* to_string(LossCombo c);

struct EpsMode {
  bool dynamic = true;
  double fixed = 0.0;
};

struct TrainConfig {
  int stage1_epochs = 30;
  int stage2_epochs = 30;
  int batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  AugmentParams augment;
  int bmm_warm_iters = 2;
  EmOptions bmm_cold;  // max_iters 50, tol 1e-6
  int fkl_k = 2;
  double ema_beta = 0.7;
  std::vector<int> hidden{64, 64};
  LossCombo combo = LossCombo::full;
  EpsMode eps_mode;
  bool retain_history = false;
  uint64_t seed = 0;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  int stage = 1;
  double train_loss = 0.0;
  double test_acc = 0.0;
  int label_wave = -1;     // -1: undefined (first epoch)
  double auc_we = -1.0;    // -1: oracle unavailable
  double auc_loss = -1.0;
};

struct Stage1Result {
  Model base;
  Model final_model;
  int base_epoch = 0;
  DynamicsLedger ledger;
  std::vector<EpochMetrics> metrics;
};

// CE warmup: trains on given labels, folds a full-train prediction pass
// into the ledger each epoch, and recovers the model at the first label-wave
// local minimum as the base model (final model if none occurs).
Stage1Result stage1(const TrainConfig& cfg, const Dataset& train, const Dataset& test);

// Posterior and difficulty of each sample under its class's mixture.
std::vector<WeightTriple> compute_weights(const MixtureBank& bank, const DynamicsLedger& ledger,
                                          std::span<const int> labels);

// Zeroes the coefficients of dropped loss terms and applies the fixed-eps
// ablation override.
WeightTriple effective_triple(const WeightTriple& wt, LossCombo combo, const EpsMode& eps);

// L = tau1*(CE(p_w)+CE(p_s)) + eps*sum_j (p_w-p_s)^2
//   + tau2*(-c * sum_j qbar_j log q_j),  q = (p_w+p_s)/2.
// qbar and c are gradient-detached. When dp_w/dp_s are non-empty they
// receive dL/dp for each view (overwritten, not accumulated).
double ido_loss(std::span<const double> p_w, std::span<const double> p_s, int label,
                const WeightTriple& wt, std::span<double> dp_w = {}, std::span<double> dp_s = {});

// Same value with the detached target and confidence pinned to the provided
// snapshot; this is what a finite-difference probe must evaluate.
double ido_loss_frozen(std::span<const double> p_w, std::span<const double> p_s, int label,
                       const WeightTriple& wt, std::span<const double> q_bar, double conf);

// Full stage-2 composition over a fixed two-view batch, for grad_check.
class IdoLossProbe : public LossProbe {
 public:
  IdoLossProbe(std::vector<double> weak, std::vector<double> strong, std::vector<int> labels,
               std::vector<WeightTriple> weights, int dim);
  void capture(const Model& m) override;
  double loss_and_grad(const Model& m, Gradients& g) const override;
  double loss_frozen(const Model& m) const override;

 private:
  std::vector<double> weak_, strong_;
  std::vector<int> labels_;
  std::vector<WeightTriple> weights_;
  int dim_;
  std::vector<std::vector<double>> q_bar_;
  std::vector<double> conf_;
};

struct Stage2Result {
  Model model;
  MixtureBank final_bank;
  std::vector<WeightTriple> final_weights;
  std::vector<double> final_wnorm;
  std::vector<EpochMetrics> metrics;
  double coeff_sum_max_dev = 0.0;  // max |tau1+tau2-1| over all samples/epochs
  double eps_min = 1.0;            // extremes of the dynamic difficulty
  double eps_max = 0.0;
  std::vector<std::string> warnings;
};

// Dynamically weighted robust training: per epoch, refit the mixture bank on
// cumulative wrong events (cold first, warm after), look up per-sample
// coefficients, run two-view minibatch updates under cosine lr decay, then
// fold an averaged two-view prediction pass into the ledger.
Stage2Result stage2(const TrainConfig& cfg, const Dataset& train, const Dataset& test,
                    const Model& base, DynamicsLedger& ledger);

}  // namespace ido
