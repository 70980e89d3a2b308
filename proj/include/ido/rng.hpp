#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace ido {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Labeled sub-seed derivation: one master seed fans out to independent,
// reproducible streams ("datagen", "noise", "init", "aug-w" ...), so any
// component can be re-run in isolation with identical draws.
inline uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t a = 0,
                            uint64_t b = 0) {
  uint64_t h = fnv1a64(label);
  h = splitmix64(h ^ splitmix64(master));
  h = splitmix64(h ^ splitmix64(a ^ 0x9e3779b97f4a7c15ull));
  h = splitmix64(h ^ splitmix64(b ^ 0xbf58476d1ce4e5b9ull));
  return h;
}

// Deterministic draws on top of std::mt19937_64. The engine itself is fully
// specified by the standard; the std distributions are not, so the few
// distributions needed here are implemented explicitly.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}

  uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; u1 in (0, 1]
  double normal() {
    const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  // unbiased integer in [0, n)
  uint64_t below(uint64_t n) {
    const uint64_t t = (0 - n) % n;
    for (;;) {
      const uint64_t r = eng_();
      if (r >= t) return r % n;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ido
