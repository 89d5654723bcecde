#pragma once

// Deterministic random streams. Every stream is a pure function of
// (seed, stream index) so results never depend on scheduling.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace lcca {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// mt19937_64 with explicit transforms, so draws are identical across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential() { return -std::log1p(-uniform()); }

  double normal() {
    // Box-Muller; the second variate is discarded to keep the stream simple.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  /// Draw from a probability vector by inversion; the last category
  /// absorbs rounding slack.
  template <typename Probs>
  std::size_t categorical(const Probs& p) {
    const double u = uniform();
    double acc = 0.0;
    const auto n = static_cast<std::size_t>(p.size());
    for (std::size_t m = 0; m + 1 < n; ++m) {
      acc += p[m];
      if (u < acc) return m;
    }
    return n - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lcca
