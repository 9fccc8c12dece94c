#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace attrikit {

/// Seeded random stream. The distribution transforms are written out
/// explicitly (std::*_distribution output is implementation-defined),
/// so a given seed produces the same sequence on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound), bound >= 1. Rejection-free modulo is
  /// fine here; bias is negligible for the small bounds used.
  std::uint64_t uniform_index(std::uint64_t bound) { return gen_() % bound; }

  /// Standard normal via Box-Muller, one cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates with the explicit index draw above.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i + 1));
      std::swap(items[i], items[j]);
    }
  }

  /// Independent substream; distinct labels give distinct streams.
  Rng fork(std::uint64_t label) {
    return Rng(next_u64() ^ (0x9e3779b97f4a7c15ull * (label + 1)));
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace attrikit
