// Counter-seeded random streams. Streams are value-derived from
// (seed, stream id) so replicate loops reproduce bit-for-bit in any order.
#pragma once

#include <cmath>
#include <cstdint>

namespace advprec {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed + 0x632be59bd9b4e019ULL) ^ (stream * 0x9e3779b97f4a7c15ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed)) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : state_(derive_stream(seed, stream)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in the open interval (0, 1)
  double uniform01() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; the spare of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // rejection-free modulo is fine for the shuffle sizes used here
    return next_u64() % n;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace advprec
