#include "ido/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ido/rng.hpp"

namespace ido {

namespace {
constexpr double kPi = 3.14159265358979323846;

int sample_row(const TransitionMatrix& t, int truth, double u) {
  double acc = 0.0;
  for (int j = 0; j < t.k; ++j) {
    acc += t.at(truth, j);
    if (u < acc) return j;
  }
  return t.k - 1;  // u landed on accumulated rounding slack
}
}  // namespace

void TransitionMatrix::validate() const {
  if (k < 2) throw std::invalid_argument("transition matrix: k must be >= 2");
  if (entries.size() != static_cast<size_t>(k) * k)
    throw std::invalid_argument("transition matrix: entry count mismatch");
  for (int i = 0; i < k; ++i) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
      const double v = at(i, j);
      if (v < 0.0 || v > 1.0)
        throw std::invalid_argument("transition matrix: entry outside [0,1]");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("transition matrix: row " + std::to_string(i) +
                                  " does not sum to 1");
  }
}

Dataset make_gaussian_clusters(int k, int n_per_class, int d, double sep, double spread,
                               uint64_t seed) {
  if (k < 2) throw std::invalid_argument("make_gaussian_clusters: k must be >= 2");
  if (n_per_class < 1) throw std::invalid_argument("make_gaussian_clusters: n_per_class >= 1");
  if (d < 2) throw std::invalid_argument("make_gaussian_clusters: d must be >= 2");
  if (!(sep > 0.0)) throw std::invalid_argument("make_gaussian_clusters: sep must be > 0");
  if (!(spread > 0.0)) throw std::invalid_argument("make_gaussian_clusters: spread must be > 0");

  // Centers on a circle in the first two coordinates; the chord between
  // adjacent centers equals sep, so all pairwise distances are >= sep.
  const double radius = sep / (2.0 * std::sin(kPi / k));
  Dataset ds;
  ds.n_classes = k;
  ds.dim = d;
  const size_t n = static_cast<size_t>(k) * n_per_class;
  ds.features.reserve(n * d);
  ds.given_labels.reserve(n);
  ds.true_labels.reserve(n);

  Rng rng(seed);
  for (int c = 0; c < k; ++c) {
    const double angle = 2.0 * kPi * c / k;
    const double cx = radius * std::cos(angle);
    const double cy = radius * std::sin(angle);
    for (int i = 0; i < n_per_class; ++i) {
      ds.features.push_back(cx + spread * rng.normal());
      ds.features.push_back(cy + spread * rng.normal());
      for (int j = 2; j < d; ++j) ds.features.push_back(spread * rng.normal());
      ds.given_labels.push_back(c);
      ds.true_labels.push_back(c);
    }
  }
  return ds;
}

TransitionMatrix symmetric_noise_matrix(int k, double eta) {
  if (k < 2) throw std::invalid_argument("symmetric_noise_matrix: k must be >= 2");
  if (eta < 0.0 || eta > 1.0)
    throw std::invalid_argument("symmetric_noise_matrix: eta must be in [0,1]");
  TransitionMatrix t;
  t.k = k;
  t.noise_rate = eta;
  t.entries.assign(static_cast<size_t>(k) * k, eta / k);
  for (int i = 0; i < k; ++i) t.entries[static_cast<size_t>(i) * k + i] = 1.0 - eta * (k - 1) / k;
  t.validate();
  return t;
}

TransitionMatrix asymmetric_noise_matrix(int k, double eta) {
  if (k < 2) throw std::invalid_argument("asymmetric_noise_matrix: k must be >= 2");
  if (eta < 0.0 || eta > 1.0)
    throw std::invalid_argument("asymmetric_noise_matrix: eta must be in [0,1]");
  TransitionMatrix t;
  t.k = k;
  t.noise_rate = eta;
  t.entries.assign(static_cast<size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i) {
    t.entries[static_cast<size_t>(i) * k + i] = 1.0 - eta;
    t.entries[static_cast<size_t>(i) * k + (i + 1) % k] = eta;
  }
  t.validate();
  return t;
}

Dataset apply_transition(const Dataset& ds, const TransitionMatrix& t, uint64_t seed) {
  ds.validate();
  t.validate();
  if (t.k != ds.n_classes)
    throw std::invalid_argument("apply_transition: matrix size does not match class count");
  if (!ds.is_clean())
    throw std::invalid_argument("apply_transition: dataset labels already corrupted");

  Dataset out = ds;
  Rng rng(seed);
  for (size_t i = 0; i < out.size(); ++i)
    out.given_labels[i] = sample_row(t, out.true_labels[i], rng.uniform());
  return out;
}

Dataset instance_noise(const Dataset& ds, double eta, uint64_t seed) {
  ds.validate();
  if (eta < 0.0 || eta >= 1.0) throw std::invalid_argument("instance_noise: eta must be in [0,1)");
  if (!ds.is_clean())
    throw std::invalid_argument("instance_noise: dataset labels already corrupted");

  Dataset out = ds;
  if (eta == 0.0) return out;  // rate distribution collapses at zero

  const int k = ds.n_classes;
  const int d = ds.dim;
  Rng rng(seed);

  // Fixed projection shared by all samples: identical features yield
  // identical flip distributions.
  std::vector<double> proj(static_cast<size_t>(d) * k);
  for (auto& v : proj) v = rng.normal();

  std::vector<double> logits(k);
  for (size_t i = 0; i < out.size(); ++i) {
    const double q = std::clamp(rng.normal(eta, 0.1), 0.0, 1.0);
    const double u_flip = rng.uniform();
    const double u_target = rng.uniform();
    if (u_flip >= q) continue;

    const auto x = out.row(i);
    const int truth = out.true_labels[i];
    double max_logit = -1e300;
    for (int c = 0; c < k; ++c) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += x[j] * proj[static_cast<size_t>(j) * k + c];
      logits[c] = s;
      if (c != truth) max_logit = std::max(max_logit, s);
    }
    double z = 0.0;
    for (int c = 0; c < k; ++c) {
      logits[c] = c == truth ? 0.0 : std::exp(logits[c] - max_logit);
      z += logits[c];
    }
    double acc = 0.0;
    int target = truth == k - 1 ? k - 2 : k - 1;
    for (int c = 0; c < k; ++c) {
      if (c == truth) continue;
      acc += logits[c] / z;
      if (u_target < acc) {
        target = c;
        break;
      }
    }
    out.given_labels[i] = target;
  }
  return out;
}

}  // namespace ido
