#include <doctest.h>

#include <cmath>

#include "kinslab/velocity.hpp"

using namespace kinslab;

TEST_CASE("gauss-hermite grid: construction and invariants") {
  VelocityGrid g = build_velocity_grid(VelocityRule::gauss_hermite_tensor, 8);
  CHECK(g.size() == 512);
  // normalization of mu
  double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.w[i] * mu_of(g.nodes[i]);
  CHECK(std::abs(s - 1.0) < g.tol_q + 1e-12);
  // no grazing node, sign-flip symmetry with equal weights
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g.nodes[i][2] != 0.0);
    const auto& v = g.nodes[i];
    bool found = false;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const auto& u = g.nodes[j];
      if (u[0] == -v[0] && u[1] == -v[1] && u[2] == -v[2]) {
        found = true;
        CHECK(g.w[j] == doctest::Approx(g.w[i]).epsilon(1e-14));
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("odd per-axis count is rejected (grazing node)") {
  CHECK_THROWS(build_velocity_grid(VelocityRule::gauss_hermite_tensor, 7));
  CHECK_THROWS(build_velocity_grid(VelocityRule::uniform_truncated, 12, -1.0));
}

TEST_CASE("uniform grid: 12^3 with cutoff 6") {
  VelocityGrid g = build_velocity_grid(VelocityRule::uniform_truncated, 12, 6.0);
  CHECK(g.size() == 1728);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (int d = 0; d < 3; ++d) CHECK(std::abs(g.nodes[i][d]) <= 6.0);
}

TEST_CASE("gauss-hermite exactness on monomials up to degree 5 per axis") {
  VelocityGrid g = build_velocity_grid(VelocityRule::gauss_hermite_tensor, 8);
  auto gauss_moment = [](int p) {  // int x^p e^{-x^2/2}/sqrt(2pi) dx
    if (p % 2 == 1) return 0.0;
    double m = 1;
    for (int k = 1; k < p; k += 2) m *= k;
    return m;
  };
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; b <= 5; ++b)
      for (int c = 0; c <= 5; ++c) {
        double s = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const auto& v = g.nodes[i];
          s += g.w[i] * std::pow(v[0], a) * std::pow(v[1], b) * std::pow(v[2], c) *
               mu_of(v);
        }
        double exact = gauss_moment(a) * gauss_moment(b) * gauss_moment(c);
        CHECK(std::abs(s - exact) < 1e-12 * std::max(1.0, std::abs(exact)));
      }
}

TEST_CASE("moment table") {
  VelocityGrid g = build_velocity_grid(VelocityRule::gauss_hermite_tensor, 12);
  double m2 = 0, m4 = 0, s2 = 0, s4 = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& v = g.nodes[i];
    double mu = mu_of(v);
    double sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    m2 += g.w[i] * v[0] * v[0] * mu;
    m4 += g.w[i] * v[0] * v[0] * v[0] * v[0] * mu;
    s2 += g.w[i] * sq * mu;
    s4 += g.w[i] * sq * sq * mu;
  }
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s2 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s4 == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("maxwellian weights and the paper's quartic moments") {
  VelocityGrid g = build_velocity_grid(VelocityRule::gauss_hermite_tensor, 12);
  CHECK_THROWS(maxwellian(g, 0.3));
  MaxwellianWeights m = maxwellian(g, 0.125);
  CHECK(m.c_mu == doctest::Approx(std::sqrt(2 * M_PI)));
  // c_mu * sum_{v3>0} w mu |v3| in [1 - tol_q, 1 + tol_q]
  double flux = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.nodes[i][2] > 0) flux += g.w[i] * m.mu[i] * g.nodes[i][2];
  CHECK(std::abs(m.c_mu * flux - 1.0) < g.tol_q + 1e-12);
  // int v1^2 (|v|^2 - 10) mu dv = -5 ; int v1^2 (|v|^2-3)/2 (|v|^2-5) mu dv = 5
  double a = 0, b = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& v = g.nodes[i];
    double sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    a += g.w[i] * v[0] * v[0] * (sq - 10.0) * m.mu[i];
    b += g.w[i] * v[0] * v[0] * 0.5 * (sq - 3.0) * (sq - 5.0) * m.mu[i];
  }
  CHECK(a == doctest::Approx(-5.0).epsilon(1e-10));
  CHECK(b == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("inner product: conjugate symmetry and orthogonality") {
  VelocityGrid g = build_velocity_grid(VelocityRule::gauss_hermite_tensor, 8);
  MaxwellianWeights m = maxwellian(g, 0.125);
  std::vector<std::complex<double>> f(g.size()), h(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    f[i] = m.sqrt_mu[i];
    h[i] = g.nodes[i][0] * m.sqrt_mu[i];
  }
  auto ip = inner_product(std::span<const std::complex<double>>(f),
                          std::span<const std::complex<double>>(f), g);
  CHECK(std::abs(ip.real() - 1.0) < g.tol_q + 1e-12);
  auto iv = inner_product(std::span<const std::complex<double>>(h),
                          std::span<const std::complex<double>>(f), g);
  CHECK(std::abs(iv) < 1e-13);
  // conj symmetry, exactly, for the fixed summation order
  for (std::size_t i = 0; i < g.size(); ++i) {
    f[i] = {std::sin(0.1 * i), std::cos(0.2 * i)};
    h[i] = {std::cos(0.05 * i), std::sin(0.3 * i)};
  }
  auto ab = inner_product(std::span<const std::complex<double>>(f),
                          std::span<const std::complex<double>>(h), g);
  auto ba = inner_product(std::span<const std::complex<double>>(h),
                          std::span<const std::complex<double>>(f), g);
  CHECK(ab.real() == doctest::Approx(ba.real()).epsilon(1e-15));
  CHECK(ab.imag() == doctest::Approx(-ba.imag()).epsilon(1e-15));
}
