// Small shared utilities: seeded RNG with platform-stable output, misc helpers.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mfad {

// mt19937_64 wrapper producing doubles directly from the raw stream, so that
// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform in [a, b)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // uniform integer in [0, n)
  uint64_t index(uint64_t n) { return gen_() % n; }

  uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

inline long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace mfad
