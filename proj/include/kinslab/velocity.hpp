#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace kinslab {

enum class VelocityRule { gauss_hermite_tensor, uniform_truncated };

std::string to_string(VelocityRule r);
VelocityRule velocity_rule_from_string(const std::string& s);

/// Tensor velocity grid in R^3 with quadrature weights for plain dv integrals.
/// Nodes exclude v3 = 0 (even n_per_axis), and the node set is symmetric under
/// every coordinate sign flip.
class VelocityGrid {
 public:
  VelocityRule rule;
  int n_per_axis = 0;
  double cutoff = 0.0;  // uniform_truncated only

  std::vector<double> axis;        // per-axis nodes, ascending
  std::vector<double> axis_w;      // per-axis weights
  std::vector<double> cell_bnd;    // cell boundaries incl. ghost margin (size n_cells+1)
  int n_cells = 0;                 // cells per axis (incl. margin cells for GH)
  int margin = 0;                  // margin cells per side (0 or 1)

  std::vector<std::array<double, 3>> nodes;  // size N
  std::vector<double> w;                     // quadrature weights, size N

  double tol_q = 0.0;  // certified quadrature tolerance (measured probes)

  std::size_t size() const { return nodes.size(); }
  int index(int ix, int iy, int iz) const {
    return (ix * n_per_axis + iy) * n_per_axis + iz;
  }

  /// FNV-1a hash of the defining parameters (for operator caching).
  std::uint64_t hash() const;

  std::string to_json(double theta) const;
};

/// Per-axis cubic interpolation stencil for the collision dressing: cell c
/// uses the centered node quartet (t .. t+3), clamped at the hull; the
/// centered choice is mirror-symmetric, which the assembled operator needs to
/// inherit the v -> -v equivariance of the kernel.
int q3_quad_of_cell(const VelocityGrid& g, int cell);

struct MaxwellianWeights {
  double theta = 0.125;
  double c_mu = 0.0;      // sqrt(2*pi)
  double c_half = 0.0;    // discrete 1/sum_{v3>0} w mu |v3| (wall-flux normalizer)
  std::vector<double> mu;
  std::vector<double> sqrt_mu;
  std::vector<double> wexp;  // e^{theta |v|^2}
};

VelocityGrid build_velocity_grid(VelocityRule rule, int n_per_axis, double cutoff = 0.0);
MaxwellianWeights maxwellian(const VelocityGrid& grid, double theta);

double mu_of(const std::array<double, 3>& v);
double sqrt_mu_of(const std::array<double, 3>& v);

/// Discrete L^2_v pairing sum_i w_i f_i conj(g_i).
std::complex<double> inner_product(std::span<const std::complex<double>> f,
                                   std::span<const std::complex<double>> g,
                                   const VelocityGrid& grid);
double inner_product(std::span<const double> f, std::span<const double> g,
                     const VelocityGrid& grid);

}  // namespace kinslab
