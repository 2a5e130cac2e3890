#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace kinslab {

struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
};

/// Gauss-Legendre on [-1,1].
Rule1D gauss_legendre(int n);

/// Gauss-Legendre mapped to [a,b].
Rule1D gauss_legendre_on(int n, double a, double b);

/// Gauss-Hermite for weight e^{-t^2} (Golub-Welsch).
Rule1D gauss_hermite(int n);

/// Adaptive Gauss-Kronrod-style 1D quadrature (Gauss 7 / refined 15 pair on
/// bisected intervals).
double adaptive_quad(const std::function<double(double)>& f, double a, double b,
                     double tol = 1e-12, int max_depth = 40);

/// Product rule on S^2: Gauss-Legendre in cos(theta) x uniform phi.
/// Weights sum to 4*pi.
struct SphereRule {
  std::vector<std::array<double, 3>> dirs;
  std::vector<double> w;
};
SphereRule sphere_rule(int n_theta, int n_phi);

/// Gauss points and weights for a box integral with a 1/r singularity at one
/// corner: Duffy transform, 3 pyramids per box. `corner` must coincide with a
/// box corner. Weights include the full Jacobian.
struct PointSet3D {
  std::vector<std::array<double, 3>> pts;
  std::vector<double> w;
};
PointSet3D duffy_corner(const std::array<double, 3>& corner,
                        const std::array<double, 3>& lo,
                        const std::array<double, 3>& hi, int nt, int ns);

}  // namespace kinslab
