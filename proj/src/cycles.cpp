#include "kinslab/cycles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kinslab/parallel.hpp"

namespace kinslab {

std::array<double, 3> sample_diffuse_velocity(Rng& rng, int wall_sign) {
  double v1 = rng.normal();
  double v2 = rng.normal();
  double v3 = rng.rayleigh();
  // outward sign of the wall: velocities point INTO the slab for the backward flight
  return {v1, v2, wall_sign > 0 ? v3 : -v3};
}

double CycleRun::ci_half(int k, double z) const {
  double p = p_hat(k);
  return z * std::sqrt(std::max(p * (1 - p), 1e-300) / samples);
}

CycleRun run_cycles(const CycleConfig& cfg) {
  if (cfg.samples < 1) throw std::invalid_argument("samples >= 1 required");
  if (!(cfg.T0 >= 0)) throw std::invalid_argument("T0 must be nonnegative");
  CycleRun run;
  run.config = cfg;
  run.samples = cfg.samples;
  run.survive.assign(cfg.k_max, 0);
  int nchunks = std::max(1, cfg.threads * 8);
  std::vector<std::vector<std::uint64_t>> part(nchunks,
                                               std::vector<std::uint64_t>(cfg.k_max, 0));
  std::vector<std::uint64_t> chunk_lo(nchunks + 1, 0);
  for (int c = 0; c <= nchunks; ++c)
    chunk_lo[c] = cfg.samples * static_cast<std::uint64_t>(c) / nchunks;
  parallel_for(nchunks, cfg.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t c = lo; c < hi; ++c) {
      Rng rng(split_seed(cfg.seed, c));
      auto& acc = part[c];
      for (std::uint64_t s = chunk_lo[c]; s < chunk_lo[c + 1]; ++s) {
        // deterministic first backward exit from (x3, v)
        double v3 = cfg.v[2];
        double t = cfg.T0;
        int wall;  // sign of the wall reached by the backward flight
        if (std::abs(v3) < 1e-300) {
          // grazing draw (probability zero): treated as immediate escape
          continue;
        }
        double tb = v3 > 0 ? (cfg.x3 + 1.0) / v3 : (cfg.x3 - 1.0) / v3;
        wall = v3 > 0 ? -1 : +1;
        t -= tb;
        for (int k = 1; k <= cfg.k_max; ++k) {
          if (t <= 0) break;
          acc[k - 1] += 1;
          // diffuse redraw at the wall, backward flight to the other wall
          double u3;
          do {
            u3 = rng.rayleigh();
          } while (u3 < 1e-300);
          rng.normal();  // v1, v2 components drawn for fidelity to the measure
          rng.normal();
          t -= 2.0 / u3;
          wall = -wall;
        }
      }
    }
  });
  for (int c = 0; c < nchunks; ++c)
    for (int k = 0; k < cfg.k_max; ++k) run.survive[k] += part[c][k];
  return run;
}

PersistenceTable estimate_persistence(const std::vector<double>& T0_list, int k_max,
                                      std::uint64_t samples, std::uint64_t seed,
                                      int threads) {
  PersistenceTable tab;
  for (std::size_t i = 0; i < T0_list.size(); ++i) {
    CycleConfig cfg;
    cfg.T0 = T0_list[i];
    cfg.k_max = k_max;
    cfg.samples = samples;
    cfg.seed = split_seed(seed, i);
    cfg.threads = threads;
    tab.runs.push_back(run_cycles(cfg));
  }
  // envelope check: log p concave-or-linear decreasing over the usable range
  for (const auto& run : tab.runs) {
    std::vector<double> logp;
    for (int k = 1; k <= k_max; ++k) {
      if (run.survive[k - 1] < 100) break;  // below the resolvable regime
      logp.push_back(std::log(run.p_hat(k)));
    }
    for (std::size_t k = 1; k < logp.size(); ++k)
      if (logp[k] > logp[k - 1] + 1e-9) tab.geometric_envelope = false;
  }
  // fitted (C1, C2): scan C1, evaluate p at k = ceil(C1 T0^{5/4}), pick the C1
  // maximizing the worst-case C2 = -log2 p / T0^{5/4}
  double bestC1 = 0, bestC2 = -1;
  for (double c1 = 0.2; c1 <= 3.0; c1 += 0.1) {
    double worst = 1e300;
    bool ok = true;
    for (std::size_t i = 0; i < T0_list.size(); ++i) {
      double t54 = std::pow(T0_list[i], 1.25);
      int k = static_cast<int>(std::ceil(c1 * t54));
      if (k < 1) k = 1;
      if (k > k_max || tab.runs[i].survive[k - 1] < 100) {
        ok = false;
        break;
      }
      double c2 = -std::log2(tab.runs[i].p_hat(k)) / t54;
      worst = std::min(worst, c2);
    }
    if (ok && worst > bestC2) {
      bestC2 = worst;
      bestC1 = c1;
    }
  }
  tab.C1_hat = bestC1;
  tab.C2_hat = bestC2;
  for (std::size_t i = 0; i < T0_list.size(); ++i) {
    double t54 = std::pow(T0_list[i], 1.25);
    int k = std::max(1, static_cast<int>(std::ceil(bestC1 * t54)));
    k = std::min(k, k_max);
    tab.T0.push_back(T0_list[i]);
    tab.k_at.push_back(k);
    tab.p_at.push_back(tab.runs[i].p_hat(k));
  }
  return tab;
}

}  // namespace kinslab
