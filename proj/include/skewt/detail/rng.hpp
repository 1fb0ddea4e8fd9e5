// Seeded random variate generation with fully specified transforms, so a
// given seed reproduces the same stream regardless of standard-library
// implementation details.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace skewt::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-replicate seed derivation: parallel and serial runs draw identical
// per-replicate streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index + 1));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  // Uniform on (0, 1); never returns an exact endpoint.
  double uniform() {
    const std::uint64_t bits = eng_() >> 11;  // 53 random bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller without the paired-value cache, so the draw count per variate
  // is fixed and the stream stays reproducible across call sites.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi_ * u2);
  }

  // Marsaglia-Tsang; shapes below one via the boosting identity
  // Gamma(a) = Gamma(a+1) * U^(1/a).
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::domain_error("Rng::gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  double chi_squared(double nu) { return 2.0 * gamma(0.5 * nu); }

 private:
  static constexpr double kTwoPi_ = 6.28318530717958647692;
  std::mt19937_64 eng_;
};

}  // namespace skewt::detail
