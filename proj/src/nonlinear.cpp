#include "kinslab/nonlinear.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "kinslab/parallel.hpp"

namespace kinslab {

namespace {

// small dense DFT tables for the periodic box
struct BoxDft {
  int n;
  std::vector<cplx> fwd;  // fwd[m*n+x] = e^{-i 2pi m x / n} / n
  std::vector<cplx> inv;  // inv[x*n+m] = e^{+i 2pi m x / n}
  explicit BoxDft(int n_) : n(n_), fwd(n_ * n_), inv(n_ * n_) {
    for (int m = 0; m < n; ++m)
      for (int x = 0; x < n; ++x) {
        double ph = 2.0 * M_PI * m * x / n;
        fwd[m * n + x] = std::exp(cplx(0, -ph)) / static_cast<double>(n);
        inv[x * n + m] = std::exp(cplx(0, ph));
      }
  }
};

double box_bump(double kx, double ky) {
  double k2 = kx * kx + ky * ky;
  return std::exp(-0.5 * k2 / (0.35 * 0.35));
}

}  // namespace

NonlinearRun evolve_nonlinear(const CollisionOperator& cop, const MaxwellianWeights& mw,
                              const SlabGrid& slab, int n_reg, const GammaEvaluator& gamma,
                              const NonlinearConfig& cfg) {
  const int nb = cfg.n_box;
  const int nm = nb * nb;
  const VelocityGrid& vg = cop.grid;
  const std::size_t Nv = vg.size();
  const int Nx = slab.Nx;
  if (&gamma.grid() != &vg && gamma.grid().hash() != vg.hash())
    throw std::invalid_argument("Gamma evaluator grid differs from the collision grid");

  auto kval = [&](int m) {
    int s = m <= nb / 2 ? m : m - nb;  // signed mode index
    return cfg.dk * s;
  };

  // mode operators + steppers
  std::vector<std::unique_ptr<ModeOperator>> ops(nm);
  for (int mx = 0; mx < nb; ++mx)
    for (int my = 0; my < nb; ++my)
      ops[mx * nb + my] = std::make_unique<ModeOperator>(cop, mw, slab, kval(mx), kval(my),
                                                         n_reg, true, WallBc::diffuse);
  const std::size_t nred = ops[0]->reduced_size();

  // initial data: real radial bump rho0(|k|) sqmu, amplitude-scaled
  std::vector<std::vector<cplx>> G(nm), Gp(nm);  // solution and P0-profile twin
  const auto& sq = ops[0]->sqmu_reduced();
  for (int m = 0; m < nm; ++m) {
    int mx = m / nb, my = m % nb;
    double amp = cfg.amplitude * box_bump(kval(mx), kval(my));
    G[m].assign(nred, cplx{0, 0});
    for (std::size_t i = 0; i < nred; ++i) G[m][i] = amp * sq[i];
    Gp[m] = G[m];  // P0 f0 = f0 here (data on the mass direction already)
  }
  double amp0 = 0;
  for (int m = 0; m < nm; ++m) {
    double nn = ops[m]->norm(G[m]);
    amp0 += nn * nn;
  }

  BoxDft dft(nb);

  // workspaces for the pseudo-spectral Gamma coupling
  std::vector<double> phys(static_cast<std::size_t>(nm) * Nx * Nv);
  std::vector<double> gout(phys.size());
  std::vector<cplx> ghat(static_cast<std::size_t>(nm) * nred);
  std::vector<ModeState> full(nm);

  auto gamma_modes = [&](const std::vector<std::vector<cplx>>& modes,
                         std::vector<std::vector<cplx>>& out) {
    // embed all modes
    for (int m = 0; m < nm; ++m) ops[m]->embed(modes[m], full[m]);
    // inverse DFT to physical (fields are real for Hermitian data; take Re)
    // phys[(ix*nb+iy)][q][j]
    parallel_for(static_cast<std::size_t>(Nx) * Nv, cfg.threads,
                 [&](std::size_t lo, std::size_t hi) {
      std::vector<cplx> line(nm);
      for (std::size_t t = lo; t < hi; ++t) {
        for (int m = 0; m < nm; ++m) line[m] = full[m].a[t];
        for (int ix = 0; ix < nb; ++ix)
          for (int iy = 0; iy < nb; ++iy) {
            cplx s{0, 0};
            for (int mx = 0; mx < nb; ++mx) {
              cplx ex = dft.inv[ix * nb + mx];
              cplx acc{0, 0};
              for (int my = 0; my < nb; ++my) acc += dft.inv[iy * nb + my] * line[mx * nb + my];
              s += ex * acc;
            }
            phys[(static_cast<std::size_t>(ix) * nb + iy) * Nx * Nv + t] = s.real();
          }
      }
    });
    // Gamma at each physical point
    parallel_for(static_cast<std::size_t>(nm) * Nx, cfg.threads,
                 [&](std::size_t lo, std::size_t hi) {
      for (std::size_t pq = lo; pq < hi; ++pq) {
        std::size_t p = pq / Nx;
        int q = static_cast<int>(pq % Nx);
        const double* f = phys.data() + (p * Nx + q) * Nv;
        double* o = gout.data() + (p * Nx + q) * Nv;
        gamma.evaluate_real(std::span<const double>(f, Nv), std::span<const double>(f, Nv),
                            std::span<double>(o, Nv));
      }
    });
    // forward DFT back to modes, restrict
    parallel_for(static_cast<std::size_t>(Nx) * Nv, cfg.threads,
                 [&](std::size_t lo, std::size_t hi) {
      std::vector<double> line(nm);
      std::vector<cplx> hat(nm);
      for (std::size_t t = lo; t < hi; ++t) {
        for (int ix = 0; ix < nb; ++ix)
          for (int iy = 0; iy < nb; ++iy)
            line[ix * nb + iy] = gout[(static_cast<std::size_t>(ix) * nb + iy) * Nx * Nv + t];
        for (int mx = 0; mx < nb; ++mx)
          for (int my = 0; my < nb; ++my) {
            cplx s{0, 0};
            for (int ix = 0; ix < nb; ++ix) {
              cplx ex = dft.fwd[mx * nb + ix];
              cplx acc{0, 0};
              for (int iy = 0; iy < nb; ++iy) acc += dft.fwd[my * nb + iy] * line[ix * nb + iy];
              s += ex * acc;
            }
            ghat[static_cast<std::size_t>(mx * nb + my) * Nx * Nv + t] = s;
          }
      }
    });
    for (int m = 0; m < nm; ++m) {
      ModeState S(Nx, Nv);
      std::copy(ghat.begin() + static_cast<std::ptrdiff_t>(m) * Nx * Nv,
                ghat.begin() + static_cast<std::ptrdiff_t>(m + 1) * Nx * Nv, S.a.begin());
      out[m].resize(nred);
      ops[m]->restrict_(S, out[m]);
      if (cfg.gamma_scale != 1.0)
        for (auto& z : out[m]) z *= cfg.gamma_scale;
    }
  };

  NonlinearRun run;
  std::vector<double> times;
  for (int i = 0; i < cfg.samples; ++i) {
    double s = static_cast<double>(i) / (cfg.samples - 1);
    times.push_back(std::exp(std::log(1.5) + s * (std::log(1 + cfg.T) - std::log(1.5))) - 1.0);
  }

  std::vector<std::vector<cplx>> Gam(nm), Gam_prev(nm), rhs(nm);
  bool have_prev = false;
  double t = 0;
  double dt = cfg.dt0;
  std::vector<std::unique_ptr<CrankNicolson>> steppers(nm);
  auto make_steppers = [&](double d) {
    parallel_for(nm, cfg.threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t m = lo; m < hi; ++m)
        steppers[m] = std::make_unique<CrankNicolson>(*ops[m], d);
    });
  };
  make_steppers(dt);

  auto record = [&](double tt) {
    double s2 = 0, d2 = 0, p2 = 0;
    cplx mass{0, 0};
    for (int m = 0; m < nm; ++m) {
      double nn = ops[m]->norm(G[m]);
      s2 += nn * nn;
      std::vector<cplx> diff(nred);
      for (std::size_t i = 0; i < nred; ++i) diff[i] = G[m][i] - Gp[m][i];
      double dd = ops[m]->norm(diff);
      d2 += dd * dd;
      double pp = ops[m]->norm(Gp[m]);
      p2 += pp * pp;
    }
    mass = ops[0]->mass(G[0]);  // k=0 mode mass (conserved by the dynamics)
    run.times.push_back(tt);
    run.norm.push_back(std::sqrt(s2));
    run.dist_fp.push_back(std::sqrt(d2));
    run.norm_fp.push_back(std::sqrt(p2));
    run.cons_mass.push_back(std::abs(mass));
  };
  record(0.0);
  std::size_t isample = 0;
  while (isample < times.size() && times[isample] <= 1e-9) ++isample;

  while (isample < times.size()) {
    double target = times[isample];
    double step_dt = dt;
    bool temp_stepper = false;
    if (t + dt > target + 1e-12) {
      step_dt = target - t;
      temp_stepper = true;
    }
    // Gamma term (IMEX: AB2 on the nonlinear part)
    if (cfg.gamma_scale != 0.0) {
      gamma_modes(G, Gam);
    } else {
      for (int m = 0; m < nm; ++m) Gam[m].assign(nred, cplx{0, 0});
    }
    parallel_for(nm, cfg.threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t m = lo; m < hi; ++m) {
        // f <- CN(f) + dt * (3/2 Gam - 1/2 Gam_prev)  (forward Euler first step)
        std::vector<cplx> src = G[m];
        if (temp_stepper) {
          CrankNicolson cn(*ops[m], step_dt);
          cn.step(src);
        } else {
          steppers[m]->step(src);
        }
        for (std::size_t i = 0; i < nred; ++i) {
          cplx gterm = have_prev ? (1.5 * Gam[m][i] - 0.5 * Gam_prev[m][i]) : Gam[m][i];
          src[i] += step_dt * gterm;
        }
        G[m] = std::move(src);
        // linear twin
        std::vector<cplx> srcp = Gp[m];
        if (temp_stepper) {
          CrankNicolson cn(*ops[m], step_dt);
          cn.step(srcp);
        } else {
          steppers[m]->step(srcp);
        }
        Gp[m] = std::move(srcp);
      }
    });
    Gam_prev = Gam;
    have_prev = cfg.gamma_scale != 0.0;
    t += step_dt;
    if (t >= target - 1e-9) {
      record(t);
      ++isample;
      double ndt = std::min(dt * cfg.dt_growth, cfg.dt_max);
      if (std::abs(ndt - dt) > 1e-14) {
        dt = ndt;
        make_steppers(dt);
      }
    }
    // perturbative-regime guard
    double a2 = 0;
    for (int m = 0; m < nm; ++m) {
      double nn = ops[m]->norm(G[m]);
      a2 += nn * nn;
    }
    if (a2 > cfg.abort_factor * cfg.abort_factor * amp0) {
      run.aborted = true;
      break;
    }
  }
  return run;
}

}  // namespace kinslab
