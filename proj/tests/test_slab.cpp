#include <doctest.h>

#include <cmath>
#include <complex>

#include "kinslab/mode_operator.hpp"
#include "kinslab/rng.hpp"
#include "kinslab/slab.hpp"

using namespace kinslab;
using cpx = std::complex<double>;

namespace {
struct Fixture {
  VelocityGrid g = build_velocity_grid(VelocityRule::gauss_hermite_tensor, 6);
  MaxwellianWeights mw = maxwellian(g, 0.125);
  CollisionOperator op;
  Fixture() {
    AssemblyOptions o;
    o.threads = 2;
    o.run_spectrum = false;
    op = assemble_collision(g, o);
  }
};
Fixture& fx() {
  static Fixture f;
  return f;
}
}  // namespace

TEST_CASE("transport: constant field annihilated away from closure rows") {
  auto& f = fx();
  for (auto scheme : {SlabScheme::upwind_fd_order1, SlabScheme::upwind_fd_order2,
                      SlabScheme::central_sbp_order2}) {
    SlabGrid sg = SlabGrid::make(10, scheme);
    ModeState s(sg.Nx, f.g.size()), out;
    for (int q = 0; q < sg.Nx; ++q)
      for (std::size_t j = 0; j < f.g.size(); ++j) s.row(q)[j] = f.mw.sqrt_mu[j];
    apply_transport(s, f.g, sg, out);
    for (int q = 0; q < sg.Nx; ++q)
      for (std::size_t j = 0; j < f.g.size(); ++j)
        CHECK(std::abs(out.row(q)[j]) < 1e-13);
  }
}

TEST_CASE("transport: linear profile differentiated exactly") {
  auto& f = fx();
  SlabGrid sg = SlabGrid::make(10, SlabScheme::upwind_fd_order1);
  ModeState s(sg.Nx, f.g.size()), out;
  for (int q = 0; q < sg.Nx; ++q)
    for (std::size_t j = 0; j < f.g.size(); ++j)
      s.row(q)[j] = sg.x[q] * f.mw.sqrt_mu[j];
  apply_transport(s, f.g, sg, out);
  for (int q = 1; q < sg.Nx - 1; ++q)
    for (std::size_t j = 0; j < f.g.size(); ++j) {
      double v3 = f.g.nodes[j][2];
      CHECK(std::abs(out.row(q)[j] - v3 * f.mw.sqrt_mu[j]) < 1e-12);
    }
}

TEST_CASE("transport: refinement order on sin(pi x) g(v)") {
  auto& f = fx();
  auto trunc_err = [&](int Nx, SlabScheme sch) {
    SlabGrid sg = SlabGrid::make(Nx, sch);
    ModeState s(sg.Nx, f.g.size()), out;
    for (int q = 0; q < sg.Nx; ++q)
      for (std::size_t j = 0; j < f.g.size(); ++j)
        s.row(q)[j] = std::sin(M_PI * sg.x[q]) * f.mw.sqrt_mu[j];
    apply_transport(s, f.g, sg, out);
    double worst = 0;
    for (int q = 2; q < sg.Nx - 2; ++q)  // interior rows only
      for (std::size_t j = 0; j < f.g.size(); ++j) {
        double v3 = f.g.nodes[j][2];
        double exact = v3 * M_PI * std::cos(M_PI * sg.x[q]) * f.mw.sqrt_mu[j];
        worst = std::max(worst, std::abs(out.row(q)[j] - exact));
      }
    return worst;
  };
  for (auto [sch, expected] : {std::pair{SlabScheme::upwind_fd_order1, 1.0},
                               std::pair{SlabScheme::upwind_fd_order2, 2.0},
                               std::pair{SlabScheme::central_sbp_order2, 2.0}}) {
    double e1 = trunc_err(17, sch), e2 = trunc_err(33, sch);
    double order = std::log2(e1 / e2);
    CHECK(order > expected - 0.2);
  }
}

TEST_CASE("P_gamma: wall Maxwellian fixed, idempotent, zero mass flux") {
  auto& f = fx();
  SlabGrid sg = SlabGrid::make(8, SlabScheme::upwind_fd_order2);
  std::size_t Nv = f.g.size();
  ModeState s(sg.Nx, Nv);
  for (int q = 0; q < sg.Nx; ++q)
    for (std::size_t j = 0; j < Nv; ++j) s.row(q)[j] = f.mw.sqrt_mu[j];
  ModeState s0 = s;
  apply_Pgamma(s, f.g, f.mw);
  for (std::size_t t = 0; t < s.a.size(); ++t)
    CHECK(std::abs(s.a[t] - s0.a[t]) < 1e-12);  // exact with the discrete normalizer

  // v3 sqmu: post-state has zero wall mass flux
  for (int q = 0; q < sg.Nx; ++q)
    for (std::size_t j = 0; j < Nv; ++j)
      s.row(q)[j] = f.g.nodes[j][2] * f.mw.sqrt_mu[j];
  apply_Pgamma(s, f.g, f.mw);
  cpx flux{0, 0};
  for (std::size_t j = 0; j < Nv; ++j)
    flux += f.g.w[j] * f.g.nodes[j][2] * s.row(0)[j] * f.mw.sqrt_mu[j];
  CHECK(std::abs(flux) < 1e-12);

  // random state: idempotency
  Rng rng(7);
  for (auto& z : s.a) z = {rng.normal(), rng.normal()};
  apply_Pgamma(s, f.g, f.mw);
  ModeState s2 = s;
  apply_Pgamma(s2, f.g, f.mw);
  for (std::size_t t = 0; t < s.a.size(); ++t) CHECK(std::abs(s.a[t] - s2.a[t]) < 1e-13);
}

TEST_CASE("projections: idempotency and composition") {
  auto& f = fx();
  SlabGrid sg = SlabGrid::make(12, SlabScheme::upwind_fd_order2);
  Projections pr = Projections::make(f.g, f.mw, sg, 4);
  Rng rng(3);
  ModeState s(sg.Nx, f.g.size());
  for (auto& z : s.a) z = {rng.normal(), rng.normal()};
  auto diff = [](const ModeState& a, const ModeState& b) {
    double d = 0, n = 0;
    for (std::size_t t = 0; t < a.a.size(); ++t) {
      d += std::norm(a.a[t] - b.a[t]);
      n += std::norm(a.a[t]);
    }
    return std::sqrt(d / std::max(n, 1e-300));
  };
  ModeState p1 = s;
  pr.apply_P(p1);
  ModeState p2 = p1;
  pr.apply_P(p2);
  CHECK(diff(p2, p1) < 1e-10);
  ModeState q1 = s;
  pr.apply_P0(q1);
  ModeState q2 = q1;
  pr.apply_P0(q2);
  CHECK(diff(q2, q1) < 1e-10);
  // P0 factors through P
  ModeState q3 = q1;
  pr.apply_P(q3);
  CHECK(diff(q3, q1) < 1e-10);
  ModeState n1 = s;
  pr.apply_Pn(n1, 4);
  ModeState n2 = n1;
  pr.apply_Pn(n2, 4);
  CHECK(diff(n2, n1) < 1e-10);
  // int (I - P_n) f dx3 = 0
  ModeState r = s;
  pr.apply_Pn(r, 4);
  for (std::size_t j = 0; j < f.g.size(); j += 17) {
    cpx acc{0, 0};
    for (int q = 0; q < sg.Nx; ++q) acc += sg.wq[q] * (s.row(q)[j] - r.row(q)[j]);
    CHECK(std::abs(acc) < 1e-11);
  }
  // P_n annihilates the first excluded cosine mode
  ModeState hi(sg.Nx, f.g.size());
  for (int q = 0; q < sg.Nx; ++q)
    for (std::size_t j = 0; j < f.g.size(); ++j)
      hi.row(q)[j] = std::cos(5 * M_PI * sg.x[q]) * f.mw.sqrt_mu[j];
  pr.apply_Pn(hi, 4);
  double hn = 0;
  for (auto& z : hi.a) hn = std::max(hn, std::abs(z));
  CHECK(hn < 1e-10);
  CHECK_THROWS(Projections::make(f.g, f.mw, sg, 6));  // n >= Nx/2 aliases
}

TEST_CASE("L_n: orthogonality, nonnegative form, finite rank") {
  auto& f = fx();
  SlabGrid sg = SlabGrid::make(16, SlabScheme::upwind_fd_order2);
  Projections pr = Projections::make(f.g, f.mw, sg, 4);
  Rng rng(11);
  for (int n : {0, 1, 2, 3}) {
    FiniteRankReport rep = finite_rank_check(f.op, pr, sg, n, 99 + n);
    CHECK(rep.rank == 2 * n + 1);
  }
  for (int trial = 0; trial < 12; ++trial) {
    ModeState s(sg.Nx, f.g.size()), out;
    for (auto& z : s.a) z = {rng.normal(), rng.normal()};
    apply_Ln(s, f.op, pr, 3, true, out);
    cpx m{0, 0};
    double dirich = 0, nrm = 0;
    for (int q = 0; q < sg.Nx; ++q)
      for (std::size_t j = 0; j < f.g.size(); ++j) {
        m += sg.wq[q] * f.g.w[j] * out.row(q)[j] * f.mw.sqrt_mu[j];
        dirich += sg.wq[q] * f.g.w[j] * std::real(out.row(q)[j] * std::conj(s.row(q)[j]));
        nrm += sg.wq[q] * f.g.w[j] * std::norm(s.row(q)[j]);
      }
    CHECK(std::abs(m) < 1e-10 * std::sqrt(nrm));
    CHECK(dirich > -1e-10 * nrm);
  }
}

TEST_CASE("full generator conserves discrete mass") {
  auto& f = fx();
  SlabGrid sg = SlabGrid::make(8, SlabScheme::upwind_fd_order2);
  ModeOperator op(f.op, f.mw, sg, 0.0, 2, true, WallBc::diffuse);
  Rng rng(5);
  std::vector<cpx> x(op.reduced_size()), y(op.reduced_size());
  for (auto& z : x) z = {rng.normal(), rng.normal()};
  op.apply(x, y);
  CHECK(std::abs(op.mass(y)) < 1e-10 * op.norm(x));
}

TEST_CASE("mode operator: linearity and adjoint consistency") {
  auto& f = fx();
  SlabGrid sg = SlabGrid::make(8, SlabScheme::upwind_fd_order2);
  ModeOperator op(f.op, f.mw, sg, 0.17, 2, true, WallBc::diffuse);
  std::size_t n = op.reduced_size();
  Rng rng(17);
  std::vector<cpx> a(n), b(n), Aa(n), Ab(n), Aab(n), Astar_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = {rng.normal(), rng.normal()};
    b[i] = {rng.normal(), rng.normal()};
  }
  cpx al{0.7, -0.3}, be{-1.1, 0.45};
  std::vector<cpx> comb(n);
  for (std::size_t i = 0; i < n; ++i) comb[i] = al * a[i] + be * b[i];
  op.apply(a, Aa);
  op.apply(b, Ab);
  op.apply(comb, Aab);
  double lin = 0;
  for (std::size_t i = 0; i < n; ++i)
    lin = std::max(lin, std::abs(Aab[i] - al * Aa[i] - be * Ab[i]));
  CHECK(lin < 1e-12);
  // <A a, b> = <a, A* b>
  op.apply_adjoint(b, Astar_b);
  cpx lhs = op.dot(Aa, b), rhs = op.dot(a, Astar_b);
  CHECK(std::abs(lhs - rhs) < 1e-11 * std::abs(lhs));
  // energy dissipation at k=0 for boundary-consistent states
  ModeOperator op0(f.op, f.mw, sg, 0.0, 2, true, WallBc::diffuse);
  std::vector<cpx> y(n);
  op0.apply(a, y);
  CHECK(std::real(op0.dot(y, a)) < 1e-10 * op0.norm(a));
}

TEST_CASE("state round trip") {
  ModeState s(3, 5);
  for (std::size_t t = 0; t < s.a.size(); ++t)
    s.a[t] = {0.5 * static_cast<double>(t), -1.0 * static_cast<double>(t)};
  CHECK(save_state(s, "/tmp/kinslab_state.bin", "{\"test\":1}"));
  ModeState r;
  CHECK(load_state(r, "/tmp/kinslab_state.bin"));
  CHECK(r.Nx == 3);
  CHECK(r.a == s.a);
}
