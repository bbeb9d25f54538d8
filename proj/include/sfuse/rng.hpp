#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "sfuse/types.hpp"

namespace sfuse {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Mix several stream coordinates into one 64-bit seed. Used to key
/// independent per-(particle, step) streams off a single master seed so that
/// serial and parallel execution draw identical variates.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  s = splitmix64(s ^ c);
  return s;
}

/// Small counter-based random stream (splitmix64 core). Deterministic and
/// cheap to construct, so the filter can key one stream per particle per step.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(splitmix64(seed)) {}
  RngStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
            std::uint64_t c = 0)
      : state_(mix_seed(seed, a, b, c)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  /// Uniform double in (0, 1). Never returns exactly 0 or 1.
  double uniform() {
    const double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no cached spare; keeps draws stateless).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  VecX normal_vec(int n) {
    VecX v(n);
    for (int i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang; shapes below 1 use the boost
  /// Gamma(shape+1) * U^(1/shape).
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
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
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Dirichlet draw via normalized gammas. Components are clamped away from
  /// exact zero so downstream log-density evaluations stay finite.
  VecX dirichlet(const VecX& concentration, double floor = 1e-12) {
    VecX x(concentration.size());
    for (int i = 0; i < concentration.size(); ++i) x(i) = gamma(concentration(i));
    double s = x.sum();
    if (!(s > 0.0)) {
      x.setConstant(1.0);
      s = x.sum();
    }
    x /= s;
    for (int i = 0; i < x.size(); ++i) x(i) = std::max(x(i), floor);
    x /= x.sum();
    return x;
  }

  /// Uniform direction on the unit sphere.
  Vec3 unit_sphere() {
    for (;;) {
      const Vec3 v = normal_vec(3);
      const double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

  int categorical(const VecX& probabilities) {
    const double u = uniform() * probabilities.sum();
    double acc = 0.0;
    for (int i = 0; i < probabilities.size(); ++i) {
      acc += probabilities(i);
      if (u <= acc) return i;
    }
    return static_cast<int>(probabilities.size()) - 1;
  }

  int categorical(std::span<const double> probabilities) {
    return categorical(VecX(Eigen::Map<const VecX>(probabilities.data(),
                                                   static_cast<Eigen::Index>(probabilities.size()))));
  }

 private:
  std::uint64_t state_;
};

} // namespace sfuse
