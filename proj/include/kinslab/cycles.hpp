#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kinslab/rng.hpp"

namespace kinslab {

struct CycleConfig {
  double T0 = 10.0;
  int k_max = 64;
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 1;
  double x3 = 0.0;                       // initial position
  std::array<double, 3> v{1.0, 0.0, 0.7};  // initial velocity
  int threads = 2;
};

struct CycleRun {
  CycleConfig config;
  std::vector<std::uint64_t> survive;  // survive[k-1] = # samples with t^k > 0
  std::uint64_t samples = 0;
  double p_hat(int k) const { return static_cast<double>(survive[k - 1]) / samples; }
  /// normal-approximation confidence half width (z sigma)
  double ci_half(int k, double z = 3.0) const;
};

/// draws v ~ sqrt(2 pi) mu(v) |v3| dv restricted to the half space entering
/// the slab from the wall with outward sign `wall_sign` (+1: wall x3=+1).
std::array<double, 3> sample_diffuse_velocity(Rng& rng, int wall_sign);

CycleRun run_cycles(const CycleConfig& cfg);

struct PersistenceTable {
  std::vector<double> T0;
  std::vector<int> k_at;           // evaluated k = ceil(C1hat T0^{5/4})
  std::vector<double> p_at;
  double C1_hat = 0.0;
  double C2_hat = 0.0;
  bool geometric_envelope = true;  // log p concave-or-linear decreasing
  std::vector<CycleRun> runs;
};

PersistenceTable estimate_persistence(const std::vector<double>& T0_list, int k_max,
                                      std::uint64_t samples, std::uint64_t seed, int threads);

}  // namespace kinslab
