#pragma once

#include <cstdint>
#include <vector>

#include "ido/dataset.hpp"

namespace ido {

// Row-stochastic label corruption matrix: entry (i, j) is the probability of
// a ground-truth label i being recorded as j.
struct TransitionMatrix {
  int k = 0;
  double noise_rate = 0.0;
  std::vector<double> entries;  // k x k, row-major

  double at(int i, int j) const { return entries[static_cast<size_t>(i) * k + j]; }
  void validate() const;  // rows sum to 1 within 1e-12, entries in [0,1]
};

// K isotropic Gaussian clusters with centers on a circle of chord length
// `sep` (first two coordinates; remaining dims zero). Labels start clean.
Dataset make_gaussian_clusters(int k, int n_per_class, int d, double sep, double spread,
                               uint64_t seed);

TransitionMatrix symmetric_noise_matrix(int k, double eta);

// Cyclic pairing: class i flips to i+1 mod k with probability eta.
TransitionMatrix asymmetric_noise_matrix(int k, double eta);

// Resamples each given label from the row of its true label. Requires a
// clean dataset; true labels are preserved.
Dataset apply_transition(const Dataset& ds, const TransitionMatrix& t, uint64_t seed);

// Instance-dependent noise: per-sample flip rate ~ N(eta, 0.1) clipped to
// [0,1]; the flip target follows a softmax over a fixed random projection of
// the features with the true class masked out. eta == 0 produces no flips.
Dataset instance_noise(const Dataset& ds, double eta, uint64_t seed);

}  // namespace ido
