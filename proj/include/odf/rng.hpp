#pragma once

#include <cstdint>

#include "odf/vec3.hpp"

namespace odf {

// Counter-based generator (splitmix64 over a keyed counter). Output i depends
// only on (seed, stream, i), so parallel samplers can draw from independent
// streams and replay them exactly. Identical across platforms, unlike the
// standard distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : state_(mix(seed ^ 0x9e3779b97f4a7c15ull) ^ mix(stream * 0xbf58476d1ce4e5b9ull + 1)) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (one value per call; no cached spare so the
  // stream position stays a pure function of the call count).
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t state_;
};

// Direction uniform on the unit sphere (normalized 3D Gaussian construction).
inline UnitDir uniform_dir_sample(Rng& rng) {
  while (true) {
    Vec3 g{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
    double n = norm(g);
    if (n > 1e-12) return UnitDir::normalize(g);
  }
}

// Point uniform in the ball of the given radius (cube-root radius method).
inline Vec3 uniform_ball_sample(Rng& rng, double radius) {
  UnitDir d = uniform_dir_sample(rng);
  double r = radius * std::cbrt(rng.next_double());
  return d.vec() * r;
}

}  // namespace odf
