#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace uparse {

// Seeded generator wrapper. All sampling in the toolkit goes through this
// class so that a run is reproducible from its recorded seed alone; the
// distributions are hand-rolled because the std:: ones are not pinned down
// by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(engine_() % n);
  }

  // Standard Gumbel(0,1) noise, -log(-log u), with u clamped away from {0,1}.
  double gumbel() {
    double u = uniform();
    if (u < 1e-300) u = 1e-300;
    if (u > 1.0 - 1e-16) u = 1.0 - 1e-16;
    return -std::log(-std::log(u));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace uparse
