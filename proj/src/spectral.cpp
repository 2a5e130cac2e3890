#include "kinslab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kinslab/evolution.hpp"
#include "kinslab/rng.hpp"

namespace kinslab {

ResolventResult solve_resolvent(const ModeOperator& op, cplx lambda,
                                std::span<const cplx> rhs, double tol) {
  ResolventResult r;
  r.x.assign(op.reduced_size(), cplx{0, 0});
  ShiftedSolver solver(op, lambda);
  r.info = solver.solve(rhs, r.x, tol);
  return r;
}

EigResult leading_eigenpair(const ModeOperator& op, cplx shift, double tol,
                            std::size_t dense_threshold) {
  if (op.reduced_size() <= dense_threshold) {
    DenseEig de = dense_eigs(op, true);
    // rightmost eigenvalue
    std::size_t best = 0;
    for (std::size_t i = 1; i < de.values.size(); ++i)
      if (de.values[i].real() > de.values[best].real()) best = i;
    EigResult r;
    r.lambda = de.values[best];
    r.vec.assign(de.right.begin() + static_cast<std::ptrdiff_t>(best * de.n),
                 de.right.begin() + static_cast<std::ptrdiff_t>((best + 1) * de.n));
    double vn = op.norm(r.vec);
    for (auto& z : r.vec) z /= vn;
    std::vector<cplx> Bv(de.n);
    op.apply(r.vec, Bv);
    std::vector<cplx> res(de.n);
    for (std::size_t i = 0; i < de.n; ++i) res[i] = Bv[i] - r.lambda * r.vec[i];
    r.residual = op.norm(res);
    r.converged = true;
    // keep a few rightmost Ritz values as diagnostics
    std::vector<cplx> vals = de.values;
    std::sort(vals.begin(), vals.end(),
              [](cplx a, cplx b) { return a.real() > b.real(); });
    vals.resize(std::min<std::size_t>(vals.size(), 12));
    r.ritz = vals;
    return r;
  }
  return arnoldi_shift_invert(op, shift, tol);
}

G1Solution solve_G1(const CollisionOperator& cop, const MaxwellianWeights& mw,
                    const SlabGrid& slab_central, int n_reg, bool use_sym, double tol) {
  ModeOperator op(cop, mw, slab_central, 0.0, n_reg, use_sym, WallBc::zero_inflow);
  std::size_t n = op.reduced_size();
  const VelocityGrid& vg = cop.grid;
  std::size_t Nv = vg.size();
  int Nx = slab_central.Nx;

  // rhs = -i v1 sqrt(mu) (constant in x3), gathered to reduced coords
  ModeState R(Nx, Nv);
  for (int q = 0; q < Nx; ++q) {
    cplx* r = R.row(q);
    for (std::size_t j = 0; j < Nv; ++j)
      r[j] = cplx(0.0, -vg.nodes[j][0]) * mw.sqrt_mu[j];
  }
  std::vector<cplx> rhs(n), x(n, cplx{0, 0});
  op.restrict_(R, rhs);
  // solve (v3 d/dx + L) G1 = rhs <=> (-B) x = rhs at k=0, sigma=0
  ShiftedSolver solver(op, cplx{0, 0});
  // (0 - B) x = -B x  -> matches v3 dx + L
  GmresResult g = solver.solve(rhs, x, tol);

  G1Solution out;
  out.solver = g;
  out.G1_red = x;
  op.embed(x, out.G1);

  // route (b): (i/2) <v1 G1, sqmu>_{x,v}
  const SlabGrid& sg = slab_central;
  cplx mom{0, 0};
  for (int q = 0; q < Nx; ++q) {
    const cplx* r = out.G1.row(q);
    cplx d{0, 0};
    for (std::size_t j = 0; j < Nv; ++j)
      d += vg.w[j] * vg.nodes[j][0] * r[j] * mw.sqrt_mu[j];
    mom += sg.wq[q] * d;
  }
  out.lambda_star_moment = (cplx(0, 0.5) * mom).real();

  // route (a): 1/4 |G1|^2_{gamma+} + 1/2 Re <L G1, G1>
  double tr = 0;
  {
    const cplx* r0 = out.G1.row(0);
    const cplx* rN = out.G1.row(Nx - 1);
    for (std::size_t j = 0; j < Nv; ++j) {
      double v3 = vg.nodes[j][2];
      if (v3 > 0) tr += vg.w[j] * v3 * std::norm(rN[j]);
      if (v3 < 0) tr += vg.w[j] * (-v3) * std::norm(r0[j]);
    }
  }
  double dirich = 0;
  {
    ModeState LG(Nx, Nv);
    Projections pr = Projections::make(vg, mw, sg, std::max(0, n_reg));
    apply_Ln(out.G1, cop, pr, n_reg, use_sym, LG);
    cplx d{0, 0};
    for (int q = 0; q < Nx; ++q) {
      const cplx* a = LG.row(q);
      const cplx* b = out.G1.row(q);
      cplx s{0, 0};
      for (std::size_t j = 0; j < Nv; ++j) s += vg.w[j] * a[j] * std::conj(b[j]);
      d += sg.wq[q] * s;
    }
    dirich = d.real();
  }
  out.lambda_star_dirichlet = 0.25 * tr + 0.5 * dirich;
  out.route_rel_diff = std::abs(out.lambda_star_dirichlet - out.lambda_star_moment) /
                       std::abs(out.lambda_star_moment);
  double re2 = 0, tot = 0;
  for (const auto& z : out.G1.a) {
    re2 += z.real() * z.real();
    tot += std::norm(z);
  }
  out.re_fraction = std::sqrt(re2 / std::max(tot, 1e-300));
  out.mass_resid = std::abs(op.mass(x));
  if (out.lambda_star_moment <= 0)
    throw std::runtime_error("lambda* <= 0: diffusion coefficient must be positive");
  return out;
}

namespace {
// left null vector of the reduced stationary diffuse operator (-B at k=0),
// by a few inverse-power iterations on the adjoint with a tiny shift.
std::vector<cplx> left_null_vector(const ModeOperator& op) {
  std::size_t n = op.reduced_size();
  std::vector<cplx> w(n), z(n);
  const auto& sq = op.sqmu_reduced();
  for (std::size_t i = 0; i < n; ++i) w[i] = sq[i];
  ShiftedSolver adj(op, cplx{1e-8, 0}, true);
  for (int it = 0; it < 3; ++it) {
    GmresResult g = adj.solve(w, z, 1e-11);
    (void)g;
    double nn = op.norm(z);
    for (std::size_t i = 0; i < n; ++i) w[i] = z[i] / nn;
  }
  return w;
}
}  // namespace

G2Solution solve_G2_fixed_point(const ModeOperator& op, const G1Solution& g1, double k,
                                double tol, int max_iters, double ball_guard) {
  if (op.bc() != WallBc::diffuse)
    throw std::invalid_argument("G2 solve requires the diffuse-wall operator");
  const VelocityGrid& vg = op.vgrid();
  const SlabGrid& sg = op.slab();
  const MaxwellianWeights& mw = op.maxwellian_weights();
  std::size_t Nv = vg.size();
  int Nx = sg.Nx;
  std::size_t n = op.reduced_size();
  double lam_star = g1.lambda_star_moment;

  // stationary operator at k=0 (same BC/scheme/regularization)
  ModeOperator opT(op.collision(), mw, sg, 0.0, op.n_reg(), true, WallBc::diffuse);
  std::vector<cplx> wl = left_null_vector(opT);
  cplx wl_nrm2 = opT.dot(wl, wl);
  ShiftedSolver solver(opT, cplx{0, 0});

  auto weighted_dot_v1sqmu = [&](const ModeState& F) {
    cplx d{0, 0};
    for (int q = 0; q < Nx; ++q) {
      const cplx* r = F.row(q);
      cplx s{0, 0};
      for (std::size_t j = 0; j < Nv; ++j)
        s += vg.w[j] * vg.nodes[j][0] * r[j] * mw.sqrt_mu[j];
      d += sg.wq[q] * s;
    }
    return d;
  };

  // g = lam* sqmu - i v1 G1
  ModeState gfield(Nx, Nv);
  for (int q = 0; q < Nx; ++q) {
    cplx* r = gfield.row(q);
    const cplx* g1r = g1.G1.row(q);
    for (std::size_t j = 0; j < Nv; ++j)
      r[j] = lam_star * mw.sqrt_mu[j] - cplx(0, vg.nodes[j][0]) * g1r[j];
  }

  auto solve_station = [&](const ModeState& H, std::vector<cplx>& xr) {
    std::vector<cplx> b(n);
    opT.restrict_(H, b);
    // deflate the left null component, solve, remove the average-mass part
    cplx c = opT.dot(b, wl) / wl_nrm2;
    for (std::size_t i = 0; i < n; ++i) b[i] -= c * wl[i];
    std::fill(xr.begin(), xr.end(), cplx{0, 0});
    GmresResult g = solver.solve(b, xr, tol * 1e-2);
    cplx m = opT.mass(xr);
    const auto& sq = opT.sqmu_reduced();
    // <sqmu, sqmu>_{x,v} = 2 up to quadrature; use the projection mass norm
    double nrm = 0;
    {
      ModeState S(Nx, Nv);
      std::vector<cplx> sv(n);
      for (std::size_t i = 0; i < n; ++i) sv[i] = sq[i];
      nrm = std::abs(opT.mass(sv).real());
    }
    for (std::size_t i = 0; i < n; ++i) xr[i] -= (m / nrm) * sq[i];
    return g;
  };

  G2Solution out;
  ModeState G2(Nx, Nv);
  std::vector<cplx> xr(n, cplx{0, 0});
  cplx gamma{0, 0};
  double lastchange = 1.0;
  double series_eta_done = false;
  (void)series_eta_done;
  for (int it = 0; it < max_iters; ++it) {
    cplx gamma_new = cplx(0, 0.5 * k) * weighted_dot_v1sqmu(G2);
    // h = g + (lam*+gamma) k G1 + gamma sqmu - i k v1 G2tilde + (lam*+gamma) k^2 G2tilde
    ModeState H(Nx, Nv);
    for (int q = 0; q < Nx; ++q) {
      cplx* h = H.row(q);
      const cplx* gg = gfield.row(q);
      const cplx* g1r = g1.G1.row(q);
      const cplx* g2r = G2.row(q);
      for (std::size_t j = 0; j < Nv; ++j) {
        cplx lg = lam_star + gamma_new;
        h[j] = gg[j] + lg * k * g1r[j] + gamma_new * mw.sqrt_mu[j] -
               cplx(0, k * vg.nodes[j][0]) * g2r[j] + lg * k * k * g2r[j];
      }
    }
    GmresResult g = solve_station(H, xr);
    (void)g;
    ModeState G2n;
    opT.embed(xr, G2n);
    double dn = 0, nn = 0;
    for (std::size_t t = 0; t < G2n.a.size(); ++t) {
      dn += std::norm(G2n.a[t] - G2.a[t]);
      nn += std::norm(G2n.a[t]);
    }
    lastchange = std::sqrt(dn / std::max(nn, 1e-300));
    G2 = G2n;
    gamma = gamma_new;
    out.iters = it + 1;
    if (it == 0) {
      // series residual: first iterate realizes the k-truncated corrector
      cplx gam0 = cplx(0, 0.5 * k) * weighted_dot_v1sqmu(G2);
      cplx eta0 = lam_star + gam0;
      ModeState f(Nx, Nv);
      for (int q = 0; q < Nx; ++q) {
        cplx* fr = f.row(q);
        const cplx* g1r = g1.G1.row(q);
        const cplx* g2r = G2.row(q);
        for (std::size_t j = 0; j < Nv; ++j)
          fr[j] = mw.sqrt_mu[j] + k * g1r[j] + k * k * g2r[j];
      }
      std::vector<cplx> fr(n), Bf(n);
      op.restrict_(f, fr);
      op.apply(fr, Bf);
      for (std::size_t i = 0; i < n; ++i) Bf[i] += eta0 * k * k * fr[i];
      out.series_residual = op.norm(Bf);
    }
    double g2norm = 0;
    for (const auto& z : G2.a) g2norm += std::norm(z);
    if (std::sqrt(g2norm) > ball_guard * std::max(1.0, lam_star))
      throw std::runtime_error("contraction failure, k too large");
    if (lastchange < tol) {
      out.converged = true;
      break;
    }
  }
  out.fixed_point_resid = lastchange;
  out.G2 = G2;
  out.gamma = gamma;
  out.eta = lam_star + gamma;
  out.candidate_lambda = -out.eta * k * k;
  {
    ModeState f(Nx, Nv);
    for (int q = 0; q < Nx; ++q) {
      cplx* fr = f.row(q);
      const cplx* g1r = g1.G1.row(q);
      const cplx* g2r = G2.row(q);
      for (std::size_t j = 0; j < Nv; ++j)
        fr[j] = mw.sqrt_mu[j] + k * g1r[j] + k * k * g2r[j];
    }
    std::vector<cplx> fr(n), Bf(n);
    op.restrict_(f, fr);
    op.apply(fr, Bf);
    for (std::size_t i = 0; i < n; ++i) Bf[i] -= out.candidate_lambda * fr[i];
    out.converged_residual = op.norm(Bf) / op.norm(fr);
  }
  return out;
}

DispersionFit fit_dispersion(const std::vector<BranchPoint>& branch) {
  if (branch.size() < 4)
    throw std::invalid_argument("dispersion fit needs at least 4 branch points");
  // relative-weighted fit: lambda/k^2 = -lambda* + C k
  auto fit = [](const std::vector<double>& ks, const std::vector<double>& ys,
                double& lam, double& C) {
    double n = ks.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      sx += ks[i];
      sy += ys[i];
      sxx += ks[i] * ks[i];
      sxy += ks[i] * ys[i];
    }
    double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-14) throw std::runtime_error("ill-conditioned dispersion fit");
    C = (n * sxy - sx * sy) / det;
    double b = (sy * sxx - sx * sxy) / det;
    lam = -b;
  };
  std::vector<double> ks, ys;
  for (const auto& p : branch) {
    ks.push_back(p.k);
    ys.push_back(p.lambda.real() / (p.k * p.k));
  }
  DispersionFit out;
  fit(ks, ys, out.lambda_star_fit, out.C_fit);
  double res = 0, scale = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    double pred = -out.lambda_star_fit + out.C_fit * ks[i];
    res += (ys[i] - pred) * (ys[i] - pred);
    scale += ys[i] * ys[i];
  }
  out.fit_residual = std::sqrt(res / scale);
  for (std::size_t drop = 0; drop < ks.size(); ++drop) {
    std::vector<double> k2, y2;
    for (std::size_t i = 0; i < ks.size(); ++i)
      if (i != drop) {
        k2.push_back(ks[i]);
        y2.push_back(ys[i]);
      }
    double l2, c2;
    fit(k2, y2, l2, c2);
    out.loo_lambda_star.push_back(l2);
  }
  return out;
}

SemigroupSplit measure_semigroup_split(const ModeOperator& op, const EigResult& eig,
                                       std::span<const double> tgrid, double dt_cn,
                                       std::uint64_t seed) {
  std::size_t n = op.reduced_size();
  // left eigenvector for the rank-one spectral projector
  EigResult left = arnoldi_shift_invert(op, eig.lambda, 1e-8, 30, 4, false, 1e-10, true);
  std::vector<cplx> wl = left.vec;
  // Pi f = <f, wl> vr / <vr, wl>
  cplx denom = op.dot(eig.vec, wl);

  SemigroupSplit out;
  out.lambda_re = eig.lambda.real();

  // f0 = sqmu
  std::vector<cplx> f0(n);
  const auto& sq = op.sqmu_reduced();
  for (std::size_t i = 0; i < n; ++i) f0[i] = sq[i];
  double f0n = op.norm(f0);
  for (auto& z : f0) z /= f0n;

  CrankNicolson stepper(op, dt_cn);
  std::vector<cplx> f = f0;
  double t = 0;
  cplx pc = op.dot(f0, wl) / denom;
  for (double tt : tgrid) {
    while (t < tt - 1e-12) {
      stepper.step(f);
      t += dt_cn;
    }
    std::vector<cplx> diff(n);
    cplx phase = std::exp(eig.lambda * t);
    for (std::size_t i = 0; i < n; ++i) diff[i] = f[i] - phase * pc * eig.vec[i];
    out.t.push_back(t);
    out.remainder.push_back(op.norm(diff));
  }
  // fit log remainder slope over the recorded times
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < out.t.size(); ++i) {
    if (out.remainder[i] < 1e-14) break;
    double x = out.t[i], y = std::log(out.remainder[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  out.c0_measured = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
  out.remainder_dominates = out.c0_measured > std::abs(out.lambda_re);

  // || Pi - P0 || on random states
  Rng rng(seed);
  double dmax = 0;
  for (int trial = 0; trial < 12; ++trial) {
    std::vector<cplx> g(n);
    for (auto& z : g) z = cplx(rng.normal(), rng.normal());
    double gn = op.norm(g);
    for (auto& z : g) z /= gn;
    cplx c = op.dot(g, wl) / denom;
    // P0 g
    cplx mass = op.mass(g);
    std::vector<cplx> sv(n);
    for (std::size_t i = 0; i < n; ++i) sv[i] = sq[i];
    cplx mnrm = op.mass(sv);
    std::vector<cplx> d(n);
    for (std::size_t i = 0; i < n; ++i)
      d[i] = c * eig.vec[i] - (mass / mnrm) * sq[i];
    dmax = std::max(dmax, op.norm(d));
  }
  out.proj_dist = dmax;
  return out;
}

double probe_large_k_decay(const ModeOperator& op, std::span<const double> tgrid,
                           double dt_cn) {
  std::size_t n = op.reduced_size();
  std::vector<cplx> f(n);
  const auto& sq = op.sqmu_reduced();
  for (std::size_t i = 0; i < n; ++i) f[i] = sq[i];
  double f0n = op.norm(f);
  for (auto& z : f) z /= f0n;
  CrankNicolson stepper(op, dt_cn);
  double t = 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (double tt : tgrid) {
    while (t < tt - 1e-12) {
      stepper.step(f);
      t += dt_cn;
    }
    double nrm = op.norm(f);
    if (nrm < 1e-14) break;
    double y = std::log(nrm);
    sx += t;
    sy += y;
    sxx += t * t;
    sxy += t * y;
    ++m;
  }
  return -(m * sxy - sx * sy) / (m * sxx - sx * sx);
}

double resolvent_norm_estimate(const ModeOperator& op, cplx lambda, int probes,
                               std::uint64_t seed, double tol) {
  std::size_t n = op.reduced_size();
  ShiftedSolver solver(op, lambda);
  Rng rng(seed);
  double best = 0;
  for (int p = 0; p < probes; ++p) {
    std::vector<cplx> rhs(n), x(n, cplx{0, 0});
    for (auto& z : rhs) z = cplx(rng.normal(), rng.normal());
    double rn = op.norm(rhs);
    for (auto& z : rhs) z /= rn;
    GmresResult g = solver.solve(rhs, x, tol);
    (void)g;
    best = std::max(best, op.norm(x));
  }
  return best;
}

}  // namespace kinslab
