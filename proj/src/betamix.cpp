#include "ido/betamix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ido/csvio.hpp"
#include "ido/errors.hpp"

namespace ido {

namespace {

constexpr double kLogUnderflow = -745.0;  // exp() underflows to 0 below this

void check_shapes(const BetaComponent& c) {
  if (!(c.alpha > 0.0) || !(c.beta > 0.0) || !std::isfinite(c.alpha) || !std::isfinite(c.beta))
    throw std::domain_error("beta component: shapes must be finite and positive");
}

double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Modified Lentz evaluation of the continued fraction for I_x(a,b).
double beta_cont_frac(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;  // converged to working precision for all shapes used here
}

double weighted_log_density(const BetaMixture& m, double w, int comp) {
  const double weight = comp == 0 ? m.w1 : m.w2;
  const BetaComponent& c = comp == 0 ? m.comp1 : m.comp2;
  if (weight <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(weight) + beta_log_pdf(w, c);
}

double digamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return result + std::log(x) - 0.5 * inv -
         inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
}

double trigamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return result + inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 / 42.0))));
}

// Weighted beta maximum likelihood: Newton on the digamma equations, started
// from the moment-matched estimate. L1 = weighted mean of log x, L2 of
// log(1-x).
BetaComponent fit_beta_weighted(double mu, double s2, double l1, double l2) {
  double alpha = std::clamp(mu * (mu * (1.0 - mu) / s2 - 1.0), kShapeMin, kShapeMax);
  double beta = std::clamp(alpha * (1.0 - mu) / mu, kShapeMin, kShapeMax);
  for (int it = 0; it < 25; ++it) {
    const double psi_ab = digamma(alpha + beta);
    const double g1 = l1 - digamma(alpha) + psi_ab;
    const double g2 = l2 - digamma(beta) + psi_ab;
    const double tri_ab = trigamma(alpha + beta);
    const double h11 = -trigamma(alpha) + tri_ab;
    const double h22 = -trigamma(beta) + tri_ab;
    const double h12 = tri_ab;
    const double det = h11 * h22 - h12 * h12;
    if (std::abs(det) < 1e-14) break;
    double da = (g1 * h22 - g2 * h12) / det;
    double db = (g2 * h11 - g1 * h12) / det;
    // damped Newton keeps the shapes positive
    double scale = 1.0;
    while ((alpha - scale * da <= 0.0 || beta - scale * db <= 0.0) && scale > 1e-4) scale *= 0.5;
    alpha = std::clamp(alpha - scale * da, kShapeMin, kShapeMax);
    beta = std::clamp(beta - scale * db, kShapeMin, kShapeMax);
    if (std::abs(g1) < 1e-10 && std::abs(g2) < 1e-10) break;
  }
  return {alpha, beta};
}

}  // namespace

double beta_log_pdf(double x, const BetaComponent& c) {
  check_shapes(c);
  if (!(x > 0.0) || !(x < 1.0))
    throw std::domain_error("beta_pdf: x must lie strictly inside (0,1)");
  return (c.alpha - 1.0) * std::log(x) + (c.beta - 1.0) * std::log1p(-x) -
         log_beta_fn(c.alpha, c.beta);
}

double beta_pdf(double x, const BetaComponent& c) { return std::exp(beta_log_pdf(x, c)); }

double beta_cdf(double x, const BetaComponent& c) {
  check_shapes(c);
  if (x < 0.0 || x > 1.0) throw std::domain_error("beta_cdf: x must lie in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double log_front = c.alpha * std::log(x) + c.beta * std::log1p(-x) -
                           log_beta_fn(c.alpha, c.beta);
  const double front = std::exp(log_front);
  // symmetry switch keeps the continued fraction in its fast-converging zone
  if (x < (c.alpha + 1.0) / (c.alpha + c.beta + 2.0))
    return std::clamp(front * beta_cont_frac(c.alpha, c.beta, x) / c.alpha, 0.0, 1.0);
  return std::clamp(1.0 - front * beta_cont_frac(c.beta, c.alpha, 1.0 - x) / c.beta, 0.0, 1.0);
}

void BetaMixture::order_by_mean() {
  if (comp1.mean() > comp2.mean()) {
    std::swap(comp1, comp2);
    std::swap(w1, w2);
  }
}

void BetaMixture::validate() const {
  check_shapes(comp1);
  check_shapes(comp2);
  if (w1 < 0.0 || w2 < 0.0 || std::abs(w1 + w2 - 1.0) > 1e-10)
    throw std::domain_error("beta mixture: weights must be non-negative and sum to 1");
}

BetaMixture default_init() {
  BetaMixture m;
  m.comp1 = {1.0, 2.0};
  m.comp2 = {2.0, 1.0};
  m.w1 = m.w2 = 0.5;
  return m;
}

double mean_log_likelihood(const BetaMixture& m, std::span<const double> values) {
  double total = 0.0;
  for (double v : values) {
    const double l1 = weighted_log_density(m, v, 0);
    const double l2 = weighted_log_density(m, v, 1);
    const double hi = std::max(l1, l2);
    total += hi + std::log(std::exp(l1 - hi) + std::exp(l2 - hi));
  }
  return total / static_cast<double>(values.size());
}

std::pair<double, double> posterior(const BetaMixture& m, double w) {
  m.validate();
  const double l1 = weighted_log_density(m, w, 0);
  const double l2 = weighted_log_density(m, w, 1);
  if (l1 < kLogUnderflow && l2 < kLogUnderflow) {
    // both densities underflow: the nearer mean keeps the sample
    const bool first = std::abs(w - m.comp1.mean()) <= std::abs(w - m.comp2.mean());
    return first ? std::make_pair(1.0, 0.0) : std::make_pair(0.0, 1.0);
  }
  const double hi = std::max(l1, l2);
  const double e1 = std::exp(l1 - hi);
  const double e2 = std::exp(l2 - hi);
  return {e1 / (e1 + e2), e2 / (e1 + e2)};
}

double difficulty(const BetaMixture& m, double w) {
  const auto [tau1, tau2] = posterior(m, w);
  const double eps = tau1 * beta_cdf(w, m.comp1) + tau2 * (1.0 - beta_cdf(w, m.comp2));
  return std::clamp(eps, 0.0, 1.0);
}

BetaMixture fit_bmm(std::span<const double> values, const BetaMixture& init,
                    const EmOptions& opts, std::vector<double>* loglik_trace) {
  if (values.size() < kMinFitSamples)
    throw fit_error("fit_bmm: need at least " + std::to_string(kMinFitSamples) + " values");
  double sum = 0.0, sum2 = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::domain_error("fit_bmm: non-finite value");
    if (!(v > 0.0) || !(v < 1.0))
      throw std::domain_error("fit_bmm: values must lie strictly inside (0,1)");
    sum += v;
    sum2 += v * v;
  }
  const size_t n = values.size();
  const double var = sum2 / n - (sum / n) * (sum / n);
  if (var < kVarianceFloor) throw fit_error("fit_bmm: degenerate input (variance floor)");

  // True EM: responsibilities, then per-component weighted beta MLE. Shape
  // clipping can nick the ascent property at the box bounds, so the best
  // iterate is tracked and returned; the reported trace holds the accepted
  // (non-decreasing) states.
  BetaMixture cur = init;
  cur.validate();
  cur.order_by_mean();
  BetaMixture best = cur;
  double best_ll = mean_log_likelihood(cur, values);
  double prev_ll = best_ll;
  if (loglik_trace) loglik_trace->push_back(best_ll);

  std::vector<double> resp1(n);
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    for (size_t i = 0; i < n; ++i) resp1[i] = posterior(cur, values[i]).first;

    for (int k = 0; k < 2; ++k) {
      double nk = 0.0, mean_acc = 0.0, l1 = 0.0, l2 = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double r = k == 0 ? resp1[i] : 1.0 - resp1[i];
        nk += r;
        mean_acc += r * values[i];
        l1 += r * std::log(values[i]);
        l2 += r * std::log1p(-values[i]);
      }
      if (nk <= 1e-12) continue;  // emptied component keeps its parameters
      const double mu = mean_acc / nk;
      double s2 = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double r = k == 0 ? resp1[i] : 1.0 - resp1[i];
        s2 += r * (values[i] - mu) * (values[i] - mu);
      }
      s2 = std::max(s2 / nk, 1e-9);
      (k == 0 ? cur.comp1 : cur.comp2) = fit_beta_weighted(mu, s2, l1 / nk, l2 / nk);
      (k == 0 ? cur.w1 : cur.w2) = nk / static_cast<double>(n);
    }
    const double wsum = cur.w1 + cur.w2;
    cur.w1 /= wsum;
    cur.w2 /= wsum;
    cur.order_by_mean();

    const double ll = mean_log_likelihood(cur, values);
    if (ll > best_ll) {
      best = cur;
      best_ll = ll;
      if (loglik_trace) loglik_trace->push_back(ll);
    }
    if (std::abs(ll - prev_ll) < opts.tol) break;
    prev_ll = ll;
  }
  return best;
}

MixtureBank fit_bank(std::span<const double> values, std::span<const int> labels, int n_classes,
                     const MixtureBank* warm, int warm_iters, const EmOptions& cold) {
  if (values.empty()) throw fit_error("fit_bank: empty dataset");
  if (values.size() != labels.size())
    throw std::invalid_argument("fit_bank: values/labels length mismatch");
  if (n_classes < 1) throw std::invalid_argument("fit_bank: n_classes must be >= 1");
  for (int c : labels) {
    if (c < 0 || c >= n_classes) throw std::invalid_argument("fit_bank: label out of range");
  }
  if (warm && static_cast<int>(warm->per_class.size()) != n_classes)
    throw std::invalid_argument("fit_bank: warm bank class count mismatch");

  EmOptions warm_opts = cold;
  warm_opts.max_iters = warm_iters;

  MixtureBank bank;
  bank.per_class.resize(n_classes);
  bank.fallback_used.assign(n_classes, 0);

  // pooled fallback first; degenerate classes map onto it
  bank.fallback = fit_bmm(values, warm ? warm->fallback : default_init(),
                          warm ? warm_opts : cold);

  std::vector<std::vector<double>> by_class(n_classes);
  for (size_t i = 0; i < values.size(); ++i) by_class[labels[i]].push_back(values[i]);

  for (int c = 0; c < n_classes; ++c) {
    const auto& vals = by_class[c];
    bool use_fallback = vals.size() < kMinFitSamples;
    if (!use_fallback) {
      double s = 0.0, s2 = 0.0;
      for (double v : vals) {
        s += v;
        s2 += v * v;
      }
      const double var = s2 / vals.size() - (s / vals.size()) * (s / vals.size());
      use_fallback = var < kVarianceFloor;
    }
    if (!use_fallback) {
      try {
        bank.per_class[c] = fit_bmm(vals, warm ? warm->per_class[c] : default_init(),
                                    warm ? warm_opts : cold);
      } catch (const fit_error&) {
        use_fallback = true;
      }
    }
    if (use_fallback) {
      bank.per_class[c] = bank.fallback;
      bank.fallback_used[c] = 1;
    }
  }
  return bank;
}

void export_bank_csv(const MixtureBank& bank, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write file: " + path);
  out << "class,m1,alpha1,beta1,alpha2,beta2,fallback_used\n";
  for (size_t c = 0; c < bank.per_class.size(); ++c) {
    const BetaMixture& m = bank.per_class[c];
    out << c << "," << format_double(m.w1) << "," << format_double(m.comp1.alpha) << ","
        << format_double(m.comp1.beta) << "," << format_double(m.comp2.alpha) << ","
        << format_double(m.comp2.beta) << "," << static_cast<int>(bank.fallback_used[c]) << "\n";
  }
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace ido
