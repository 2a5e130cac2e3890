#pragma once

#include <vector>

#include "kinslab/evolution.hpp"
#include "kinslab/gamma.hpp"

namespace kinslab {

/// Periodic-box surrogate for the nonlinear desk run: n_box^2 horizontal
/// modes spaced dk apart, pseudo-spectral Gamma coupling (exact discrete
/// convolution on the box), IMEX stepping (Crank-Nicolson linear part,
/// Adams-Bashforth explicit Gamma).
struct NonlinearConfig {
  int n_box = 16;
  double dk = 0.15;
  double T = 50.0;
  double dt0 = 0.2;
  double dt_max = 1.0;
  double dt_growth = 1.1;
  double amplitude = 1e-3;
  double gamma_scale = 1.0;   // 0 disables the nonlinearity (consistency check)
  int samples = 18;
  int threads = 2;
  int sphere_theta = 4, sphere_phi = 8;
  double abort_factor = 10.0;  // amplitude growth guard
};

struct NonlinearRun {
  std::vector<double> times;
  std::vector<double> norm;        // Plancherel box norm of f
  std::vector<double> dist_fp;     // distance to the P0-initialized linear profile
  std::vector<double> norm_fp;     // the linear profile's own norm
  std::vector<double> cons_mass;   // mass-conservation diagnostic per sample
  bool aborted = false;
};

NonlinearRun evolve_nonlinear(const CollisionOperator& op, const MaxwellianWeights& mw,
                              const SlabGrid& slab, int n_reg, const GammaEvaluator& gamma,
                              const NonlinearConfig& cfg);

}  // namespace kinslab
