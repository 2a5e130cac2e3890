#pragma once

#include <complex>
#include <span>
#include <vector>

#include "kinslab/quadrature.hpp"
#include "kinslab/velocity.hpp"

namespace kinslab {

/// Bilinear hard-sphere collision term Gamma(f,g)(v) =
///   int int |(v-u).w| sqrt(mu(u)) [ f(u') g(v') - f(u) g(v) ] dw du
/// by direct (u, omega) quadrature on a uniform truncated grid; post-collision
/// values by trilinear interpolation, zero outside the cutoff. The loss part
/// uses the analytic sphere reduction (2 pi |v-u|) and is precomputed as a
/// dense matrix.
class GammaEvaluator {
 public:
  GammaEvaluator(const VelocityGrid& grid, int sphere_theta = 6, int sphere_phi = 12,
                 int threads = 1);

  const VelocityGrid& grid() const { return *grid_; }

  /// Gamma(f,g) for complex nodal fields.
  void evaluate(std::span<const std::complex<double>> f,
                std::span<const std::complex<double>> g,
                std::span<std::complex<double>> out) const;
  void evaluate_real(std::span<const double> f, std::span<const double> g,
                     std::span<double> out) const;

  /// measured conservation defect |<Gamma(f,f), chi sqmu>| for the invariants
  std::vector<double> conservation_defect(std::span<const double> f) const;

 private:
  const VelocityGrid* grid_;
  SphereRule sphere_;
  std::vector<double> sqmu_w_;   // sqrt(mu(u_j)) * w_j
  std::vector<double> loss_;     // dense loss matrix 2 pi |v_i-u_j| sqrt(mu_j) w_j
  int threads_;
  double h_ = 0, lo_ = 0;
  int n_ = 0;

  template <typename T>
  T interp(std::span<const T> f, const std::array<double, 3>& p) const;
};

}  // namespace kinslab
