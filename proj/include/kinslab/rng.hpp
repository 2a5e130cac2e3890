#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace kinslab {

/// splitmix64; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  return splitmix64(s);
}

/// xoshiro256++ with hand-rolled Box-Muller and inverse-CDF samplers, so that
/// streams are byte-reproducible across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& si : s_) si = splitmix64(sm);
    have_normal_ = false;
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in (0,1) (never returns 0 or 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (deterministic pairing).
  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return cached_;
    }
    double u1 = uniform(), u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_normal_ = true;
    return r * std::cos(a);
  }

  /// Rayleigh(1) via inverse CDF.
  double rayleigh() { return std::sqrt(-2.0 * std::log(1.0 - uniform())); }

  /// Uniform direction on S^2.
  std::array<double, 3> sphere() {
    double c = 2.0 * uniform() - 1.0;
    double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    double phi = 2.0 * M_PI * uniform();
    return {s * std::cos(phi), s * std::sin(phi), c};
  }

 private:
  std::uint64_t s_[4];
  bool have_normal_;
  double cached_ = 0.0;
};

}  // namespace kinslab
