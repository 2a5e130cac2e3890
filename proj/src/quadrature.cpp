#include "kinslab/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace kinslab {

Rule1D gauss_legendre(int n) {
  // Golub-Welsch for the Jacobi matrix of Legendre polynomials.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    r.x[i] = es.eigenvalues()(i);
    double v0 = es.eigenvectors()(0, i);
    r.w[i] = 2.0 * v0 * v0;
  }
  return r;
}

Rule1D gauss_legendre_on(int n, double a, double b) {
  Rule1D g = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    g.w[i] *= 0.5 * (b - a);
    g.x[i] = 0.5 * (b - a) * g.x[i] + 0.5 * (a + b);
  }
  return g;
}

Rule1D gauss_hermite(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double b = std::sqrt(i / 2.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    r.x[i] = es.eigenvalues()(i);
    double v0 = es.eigenvectors()(0, i);
    r.w[i] = sqrt_pi * v0 * v0;
  }
  return r;
}

namespace {
double gauss_fixed(const std::function<double(double)>& f, double a, double b,
                   const Rule1D& g) {
  double s = 0;
  for (std::size_t i = 0; i < g.x.size(); ++i)
    s += g.w[i] * f(0.5 * (b - a) * g.x[i] + 0.5 * (a + b));
  return 0.5 * (b - a) * s;
}

double adaptive_rec(const std::function<double(double)>& f, double a, double b,
                    double whole, double tol, int depth, const Rule1D& g) {
  double m = 0.5 * (a + b);
  double left = gauss_fixed(f, a, m, g);
  double right = gauss_fixed(f, m, b, g);
  double err = std::abs(left + right - whole);
  if (err < tol || depth <= 0) return left + right;
  return adaptive_rec(f, a, m, left, tol / 2, depth - 1, g) +
         adaptive_rec(f, m, b, right, tol / 2, depth - 1, g);
}
}  // namespace

double adaptive_quad(const std::function<double(double)>& f, double a, double b,
                     double tol, int max_depth) {
  static const Rule1D g = gauss_legendre(10);
  double whole = gauss_fixed(f, a, b, g);
  return adaptive_rec(f, a, b, whole, tol, max_depth, g);
}

SphereRule sphere_rule(int n_theta, int n_phi) {
  Rule1D gt = gauss_legendre(n_theta);
  SphereRule s;
  s.dirs.reserve(static_cast<std::size_t>(n_theta) * n_phi);
  s.w.reserve(static_cast<std::size_t>(n_theta) * n_phi);
  double dphi = 2.0 * M_PI / n_phi;
  for (int it = 0; it < n_theta; ++it) {
    double ct = gt.x[it];
    double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int ip = 0; ip < n_phi; ++ip) {
      double phi = (ip + 0.5) * dphi;
      s.dirs.push_back({st * std::cos(phi), st * std::sin(phi), ct});
      s.w.push_back(gt.w[it] * dphi);
    }
  }
  return s;
}

PointSet3D duffy_corner(const std::array<double, 3>& corner,
                        const std::array<double, 3>& lo,
                        const std::array<double, 3>& hi, int nt, int ns) {
  std::array<double, 3> h, sgn;
  for (int d = 0; d < 3; ++d) {
    bool at_lo = std::abs(corner[d] - lo[d]) < std::abs(corner[d] - hi[d]);
    sgn[d] = at_lo ? 1.0 : -1.0;
    h[d] = hi[d] - lo[d];
  }
  Rule1D gt = gauss_legendre_on(nt, 0.0, 1.0);
  Rule1D gs = gauss_legendre_on(ns, 0.0, 1.0);
  double vol = h[0] * h[1] * h[2];
  PointSet3D out;
  out.pts.reserve(3 * static_cast<std::size_t>(nt) * ns * ns);
  out.w.reserve(out.pts.capacity());
  for (int axis = 0; axis < 3; ++axis) {
    int o1 = (axis + 1) % 3, o2 = (axis + 2) % 3;
    for (int it = 0; it < nt; ++it) {
      double t = gt.x[it];
      for (int i1 = 0; i1 < ns; ++i1) {
        for (int i2 = 0; i2 < ns; ++i2) {
          std::array<double, 3> zh;
          zh[axis] = t;
          zh[o1] = t * gs.x[i1];
          zh[o2] = t * gs.x[i2];
          std::array<double, 3> p;
          for (int d = 0; d < 3; ++d) p[d] = corner[d] + sgn[d] * zh[d] * h[d];
          out.pts.push_back(p);
          out.w.push_back(t * t * vol * gt.w[it] * gs.w[i1] * gs.w[i2]);
        }
      }
    }
  }
  return out;
}

}  // namespace kinslab
