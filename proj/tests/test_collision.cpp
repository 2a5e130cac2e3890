#include <doctest.h>

#include <cmath>
#include <complex>

#include "kinslab/collision.hpp"
#include "kinslab/quadrature.hpp"

using namespace kinslab;

namespace {
CollisionOperator& op8() {
  static CollisionOperator op = [] {
    VelocityGrid g = build_velocity_grid(VelocityRule::gauss_hermite_tensor, 8);
    AssemblyOptions o;
    o.threads = 2;
    return assemble_collision(g, o);
  }();
  return op;
}
}  // namespace

TEST_CASE("nu: closed form vs radial oracle and grid quadrature") {
  // oracle: 2 pi int_0^inf r rho_speed(r) dr, rho_speed the Maxwell speed density
  double oracle = adaptive_quad(
      [](double r) {
        return 2.0 * M_PI * r * 4.0 * M_PI * r * r * std::pow(2 * M_PI, -1.5) *
               std::exp(-0.5 * r * r);
      },
      0.0, 40.0, 1e-13);
  CHECK(oracle == doctest::Approx(4.0 * std::sqrt(2.0 * M_PI)).epsilon(1e-10));
  CHECK(nu_closed_form(0.0) == doctest::Approx(oracle).epsilon(1e-12));
  VelocityGrid g = build_velocity_grid(VelocityRule::gauss_hermite_tensor, 12);
  double nu0 = compute_nu_at({0, 0, 0}, g);
  CHECK(std::abs(nu0 / oracle - 1.0) < 0.02);  // grid-quadrature estimate
  // large-speed asymptote nu(v)/(2 pi |v|) -> 1, within 3% at |v| = 6
  double nu6 = compute_nu_at({6, 0, 0}, g);
  CHECK(std::abs(nu6 / (2 * M_PI * 6.0) - 1.0) < 0.03);
}

TEST_CASE("kernel constants pinned by the continuum identity") {
  KernelConstants kc = fit_kernel_constants();
  CHECK(kc.c1 == doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-8));
  CHECK(kc.c2 == doctest::Approx(4.0 / std::sqrt(2 * M_PI)).epsilon(1e-8));
  CHECK(kc.fit_residual < 1e-8);
}

TEST_CASE("assembled operator: null relations, nu0, PSD structure") {
  CollisionOperator& op = op8();
  for (int i = 0; i < 5; ++i) CHECK(op.report.null_rel[i] < 1e-3);
  CHECK(op.report.nu0_estimate > 0);
  CHECK(op.report.nu0_estimate > 6.0);
  // symmetrized variant: exact nulls, PSD up to tolerance, positive gap
  CHECK(op.report.min_eig > -1e-10);
  CHECK(op.report.gap_velocity > 1.0);
  // K(sqmu) = nu sqmu within tol_K; K(v3 sqmu) likewise
  std::size_t N = op.n();
  std::vector<std::complex<double>> f(N), out(N);
  for (std::size_t j = 0; j < N; ++j) f[j] = sqrt_mu_of(op.grid.nodes[j]);
  op.apply_K_raw(f, out);
  double num = 0, den = 0;
  for (std::size_t j = 0; j < N; ++j) {
    num += op.grid.w[j] * std::norm(out[j] - op.nu[j] * f[j]);
    den += op.grid.w[j] * std::norm(f[j]);
  }
  CHECK(std::sqrt(num / den) < 1e-3);
}

TEST_CASE("symmetrized kernel matrix is exactly symmetric; L_sym self-adjoint") {
  CollisionOperator& op = op8();
  std::size_t N = op.n();
  double worst = 0, scale = 0;
  for (std::size_t i = 0; i < N; i += 3)
    for (std::size_t j = i + 1; j < N; j += 5) {
      double a = op.kernel_sym(i, j) ;
      double b = op.kernel_sym(j, i);
      worst = std::max(worst, std::abs(a - b));
      scale = std::max(scale, std::abs(a));
    }
  CHECK(worst <= 1e-12 * scale);
  // self-adjointness in the w metric via random states
  std::vector<std::complex<double>> f(N), g(N), Lf(N), Lg(N);
  for (std::size_t j = 0; j < N; ++j) {
    f[j] = {std::sin(0.37 * j), std::cos(0.11 * j)};
    g[j] = {std::cos(0.23 * j), std::sin(0.19 * j)};
  }
  op.apply_L_sym(f, Lf);
  op.apply_L_sym(g, Lg);
  std::complex<double> a{0, 0}, b{0, 0};
  for (std::size_t j = 0; j < N; ++j) {
    a += op.grid.w[j] * Lf[j] * std::conj(g[j]);
    b += op.grid.w[j] * f[j] * std::conj(Lg[j]);
  }
  CHECK(std::abs(a - b) < 1e-10 * std::abs(a));
  // exact nulls of the symmetrized operator
  std::vector<std::complex<double>> chi(N), out(N);
  for (std::size_t j = 0; j < N; ++j) {
    const auto& v = op.grid.nodes[j];
    chi[j] = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * sqrt_mu_of(v);
  }
  op.apply_L_sym(chi, out);
  double nn = 0, dd = 0;
  for (std::size_t j = 0; j < N; ++j) {
    nn += op.grid.w[j] * std::norm(out[j]);
    dd += op.grid.w[j] * std::norm(chi[j]);
  }
  CHECK(std::sqrt(nn / dd) < 1e-12);
}

TEST_CASE("monte carlo oracle on the non-equilibrium probe" * doctest::skip(false)) {
  CollisionOperator& op = op8();
  validate_against_mc(op, 6, 400000, 20240601, 2);
  CHECK(op.report.mc_probe_max < 0.06);  // interpolation-limited at 8^3; ~0.8% at 12^3
}

TEST_CASE("ktheta profile: finite, positive rows, decaying tails") {
  CollisionOperator& op = op8();
  KthetaDiagnostics d = ktheta_profile(op, 0.12);
  CHECK(d.all_rows_positive);
  CHECK(d.C_theta_hat > 0);
  CHECK(std::isfinite(d.C_theta_hat));
  REQUIRE(d.tail_sum.size() == 3);
  CHECK(d.tail_sum[2] < d.tail_sum[0]);  // N=16 tail below N=4 tail
  CHECK_THROWS(ktheta_profile(op, 0.5));
}

TEST_CASE("operator cache round trip") {
  CollisionOperator& op = op8();
  std::string path = "/tmp/kinslab_test_K8.bin";
  CHECK(op.save(path));
  CollisionOperator op2;
  op2.grid = op.grid;
  CHECK(CollisionOperator::load(path, op2));
  CHECK(op2.Kraw == op.Kraw);
  CHECK(op2.nu == op.nu);
}
