#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ido {

// Feature vectors with a given (possibly corrupted) label and a hidden true
// label. The true labels exist only for oracle evaluation; training code must
// never read them.
struct Dataset {
  int n_classes = 0;
  int dim = 0;
  std::vector<double> features;  // n x dim, row-major
  std::vector<int> given_labels;
  std::vector<int> true_labels;
  bool has_oracle = true;  // false when loaded from a CSV without a `true` column

  size_t size() const { return given_labels.size(); }

  std::span<const double> row(size_t i) const {
    return {features.data() + i * static_cast<size_t>(dim), static_cast<size_t>(dim)};
  }

  std::vector<char> noise_mask() const;  // given != true, derived
  size_t noisy_count() const;
  bool is_clean() const;  // given == true everywhere

  void validate() const;  // throws std::invalid_argument on a broken invariant
};

// CSV schema: header f0,...,f{d-1},given[,true]; floats at 17 significant
// digits, labels as base-10 integers. A missing `true` column disables oracle
// evaluation (true = given).
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

}  // namespace ido
