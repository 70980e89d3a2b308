#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ido {

inline constexpr double kShapeMin = 0.05;
inline constexpr double kShapeMax = 100.0;
inline constexpr double kVarianceFloor = 1e-6;
inline constexpr size_t kMinFitSamples = 10;

struct BetaComponent {
  double alpha = 1.0;
  double beta = 1.0;
  double mean() const { return alpha / (alpha + beta); }
};

double beta_log_pdf(double x, const BetaComponent& c);
double beta_pdf(double x, const BetaComponent& c);

// Regularized incomplete beta I_x(alpha, beta): continued-fraction
// evaluation with the standard symmetry switch. Exact at the endpoints.
double beta_cdf(double x, const BetaComponent& c);

// Two beta components on (0,1). After any fit, comp1 is the component with
// the smaller mean, so posterior().first is always the clean probability.
struct BetaMixture {
  BetaComponent comp1;
  BetaComponent comp2;
  double w1 = 0.5;
  double w2 = 0.5;
  void order_by_mean();
  void validate() const;
};

// Beta(1,2) + Beta(2,1), equal weights: the prior-free starting point.
BetaMixture default_init();

struct EmOptions {
  int max_iters = 50;
  double tol = 1e-6;  // convergence threshold on mean log-likelihood delta
};

// EM with weighted moment matching in the M-step. Shapes are clipped to
// [kShapeMin, kShapeMax]; an iteration that would lower the likelihood is
// rolled back, so the recorded trace is non-decreasing.
BetaMixture fit_bmm(std::span<const double> values, const BetaMixture& init,
                    const EmOptions& opts, std::vector<double>* loglik_trace = nullptr);

// (tau1, tau2): posterior responsibility of each component for w. When both
// weighted densities underflow, the component with the nearer mean wins.
std::pair<double, double> posterior(const BetaMixture& m, double w);

// tau1*F1(w) + tau2*(1 - F2(w)), clamped to [0,1]: near 0 at the extremes
// of the fitted data, near 1 in the inter-component trough.
double difficulty(const BetaMixture& m, double w);

double mean_log_likelihood(const BetaMixture& m, std::span<const double> values);

// One mixture per class plus a pooled fallback for degenerate classes.
struct MixtureBank {
  std::vector<BetaMixture> per_class;
  BetaMixture fallback;
  std::vector<char> fallback_used;
};

// Cold start: default init with the full EM budget. Warm start: previous
// bank's parameters, warm_iters iterations, no reinitialization.
MixtureBank fit_bank(std::span<const double> values, std::span<const int> labels, int n_classes,
                     const MixtureBank* warm, int warm_iters, const EmOptions& cold);

// columns: class,m1,alpha1,beta1,alpha2,beta2,fallback_used
void export_bank_csv(const MixtureBank& bank, const std::string& path);

}  // namespace ido
