#include "kinslab/slab.hpp"

#include <lapacke.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "kinslab/rng.hpp"

namespace kinslab {

std::string to_string(SlabScheme s) {
  switch (s) {
    case SlabScheme::upwind_fd_order1: return "upwind_fd_order1";
    case SlabScheme::upwind_fd_order2: return "upwind_fd_order2";
    default: return "central_sbp_order2";
  }
}

SlabScheme slab_scheme_from_string(const std::string& s) {
  if (s == "upwind_fd_order1") return SlabScheme::upwind_fd_order1;
  if (s == "upwind_fd_order2") return SlabScheme::upwind_fd_order2;
  if (s == "central_sbp_order2") return SlabScheme::central_sbp_order2;
  throw std::invalid_argument("unknown slab scheme: " + s);
}

SlabGrid SlabGrid::make(int Nx, SlabScheme scheme) {
  if (Nx < 4) throw std::invalid_argument("Nx must be >= 4");
  SlabGrid g;
  g.Nx = Nx;
  g.scheme = scheme;
  g.h = 2.0 / (Nx - 1);
  g.x.resize(Nx);
  g.wq.assign(Nx, g.h);
  for (int q = 0; q < Nx; ++q) g.x[q] = -1.0 + q * g.h;
  g.x[0] = -1.0;
  g.x[Nx - 1] = 1.0;
  g.wq[0] = g.wq[Nx - 1] = 0.5 * g.h;
  return g;
}

namespace {

// d/dx stencil tables for one velocity sign; rows index x3 node.
struct Stencil {
  // coefficients per row stored as (offset, value) triples, max 3 entries
  struct Row {
    int off[3];
    double c[3];
    int n;
  };
  std::vector<Row> rows;
};

Stencil make_stencil(const SlabGrid& g, int sgn) {
  int N = g.Nx;
  double h = g.h;
  Stencil s;
  s.rows.resize(N);
  auto set1 = [&](int q, int o0, double c0) {
    s.rows[q] = {{o0, 0, 0}, {c0, 0, 0}, 1};
  };
  auto set2 = [&](int q, int o0, double c0, int o1, double c1) {
    s.rows[q] = {{o0, o1, 0}, {c0, c1, 0}, 2};
  };
  auto set3 = [&](int q, int o0, double c0, int o1, double c1, int o2, double c2) {
    s.rows[q] = {{o0, o1, o2}, {c0, c1, c2}, 3};
  };
  (void)set1;
  switch (g.scheme) {
    case SlabScheme::central_sbp_order2:
      for (int q = 1; q < N - 1; ++q) set2(q, -1, -0.5 / h, +1, 0.5 / h);
      set2(0, 0, -1.0 / h, 1, 1.0 / h);
      set2(N - 1, -1, -1.0 / h, 0, 1.0 / h);
      break;
    case SlabScheme::upwind_fd_order1:
      if (sgn > 0) {
        for (int q = 1; q < N; ++q) set2(q, -1, -1.0 / h, 0, 1.0 / h);
        set2(0, 0, -1.0 / h, 1, 1.0 / h);
      } else {
        for (int q = 0; q < N - 1; ++q) set2(q, 0, -1.0 / h, 1, 1.0 / h);
        set2(N - 1, -1, -1.0 / h, 0, 1.0 / h);
      }
      break;
    case SlabScheme::upwind_fd_order2:
      if (sgn > 0) {
        for (int q = 2; q < N; ++q) set3(q, 0, 1.5 / h, -1, -2.0 / h, -2, 0.5 / h);
        set2(1, -1, -0.5 / h, 1, 0.5 / h);  // central fallback next to the wall
        set3(0, 0, -1.5 / h, 1, 2.0 / h, 2, -0.5 / h);
      } else {
        for (int q = 0; q < N - 2; ++q) set3(q, 0, -1.5 / h, 1, 2.0 / h, 2, -0.5 / h);
        set2(N - 2, -1, -0.5 / h, 1, 0.5 / h);
        set3(N - 1, 0, 1.5 / h, -1, -2.0 / h, -2, 0.5 / h);
      }
      break;
  }
  return s;
}

}  // namespace

void apply_transport(const ModeState& in, const VelocityGrid& vg, const SlabGrid& sg,
                     ModeState& out) {
  if (in.Nx != sg.Nx || in.Nv != vg.size()) throw std::invalid_argument("dimension mismatch");
  out.Nx = in.Nx;
  out.Nv = in.Nv;
  out.a.resize(in.a.size());
  Stencil sp = make_stencil(sg, +1);
  Stencil sn = make_stencil(sg, -1);
  std::size_t Nv = in.Nv;
  for (int q = 0; q < sg.Nx; ++q) {
    std::complex<double>* o = out.row(q);
    for (std::size_t j = 0; j < Nv; ++j) {
      double v3 = vg.nodes[j][2];
      const Stencil::Row& r = (v3 > 0 ? sp : sn).rows[q];
      std::complex<double> d{0.0, 0.0};
      for (int m = 0; m < r.n; ++m) d += r.c[m] * in.row(q + r.off[m])[j];
      o[j] = v3 * d;
    }
  }
}

void apply_Pgamma(ModeState& state, const VelocityGrid& vg, const MaxwellianWeights& mw) {
  std::size_t Nv = vg.size();
  if (state.Nv != Nv) throw std::invalid_argument("dimension mismatch");
  // left wall (x=-1): incoming v3>0, outgoing v3<0
  std::complex<double> phiL{0, 0}, phiR{0, 0};
  std::complex<double>* r0 = state.row(0);
  std::complex<double>* rN = state.row(state.Nx - 1);
  for (std::size_t j = 0; j < Nv; ++j) {
    double v3 = vg.nodes[j][2];
    if (v3 < 0) phiL += vg.w[j] * mw.sqrt_mu[j] * (-v3) * r0[j];
    if (v3 > 0) phiR += vg.w[j] * mw.sqrt_mu[j] * v3 * rN[j];
  }
  for (std::size_t j = 0; j < Nv; ++j) {
    double v3 = vg.nodes[j][2];
    if (v3 > 0) r0[j] = mw.c_half * mw.sqrt_mu[j] * phiL;
    if (v3 < 0) rN[j] = mw.c_half * mw.sqrt_mu[j] * phiR;
  }
}

Projections Projections::make(const VelocityGrid& vg, const MaxwellianWeights& mw,
                              const SlabGrid& sg, int n_max) {
  if (n_max >= sg.Nx / 2)
    throw std::invalid_argument("regularization order aliases on the x3 grid (n >= Nx/2)");
  Projections pr;
  pr.Nv = vg.size();
  pr.Nx = sg.Nx;
  pr.n_max = n_max;
  pr.wq = sg.wq;
  pr.wv = vg.w;
  pr.sqmu = mw.sqrt_mu;
  // velocity kernel basis, Gram-Schmidt in the w metric
  pr.pbasis.assign(5 * pr.Nv, 0.0);
  std::vector<double*> b(5);
  for (int a = 0; a < 5; ++a) b[a] = pr.pbasis.data() + a * pr.Nv;
  for (std::size_t j = 0; j < pr.Nv; ++j) {
    const auto& v = vg.nodes[j];
    double s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    double q = mw.sqrt_mu[j];
    b[0][j] = q;
    b[1][j] = v[0] * q;
    b[2][j] = v[1] * q;
    b[3][j] = v[2] * q;
    b[4][j] = s * q;
  }
  for (int a = 0; a < 5; ++a) {
    for (int c = 0; c < a; ++c) {
      double d = 0;
      for (std::size_t j = 0; j < pr.Nv; ++j) d += vg.w[j] * b[a][j] * b[c][j];
      for (std::size_t j = 0; j < pr.Nv; ++j) b[a][j] -= d * b[c][j];
    }
    double nn = 0;
    for (std::size_t j = 0; j < pr.Nv; ++j) nn += vg.w[j] * b[a][j] * b[a][j];
    nn = std::sqrt(nn);
    for (std::size_t j = 0; j < pr.Nv; ++j) b[a][j] /= nn;
  }
  // trig basis on x3 (L^2(-1,1)-orthonormal against the trapezoid weights)
  pr.trig.assign(static_cast<std::size_t>(2 * n_max + 1) * sg.Nx, 0.0);
  for (int q = 0; q < sg.Nx; ++q) pr.trig[q] = 1.0 / std::sqrt(2.0);
  for (int m = 1; m <= n_max; ++m)
    for (int q = 0; q < sg.Nx; ++q) {
      pr.trig[(2 * m - 1) * sg.Nx + q] = std::cos(m * M_PI * sg.x[q]);
      pr.trig[(2 * m) * sg.Nx + q] = std::sin(m * M_PI * sg.x[q]);
    }
  pr.mass_nrm = 0.0;
  double sm = 0;
  for (std::size_t j = 0; j < pr.Nv; ++j) sm += vg.w[j] * mw.sqrt_mu[j] * mw.sqrt_mu[j];
  for (int q = 0; q < sg.Nx; ++q) pr.mass_nrm += sg.wq[q] * sm;
  return pr;
}

void Projections::apply_P(ModeState& s) const {
  for (int q = 0; q < s.Nx; ++q) {
    std::complex<double>* r = s.row(q);
    std::complex<double> coef[5];
    for (int a = 0; a < 5; ++a) {
      const double* b = pbasis.data() + a * Nv;
      std::complex<double> d{0, 0};
      for (std::size_t j = 0; j < Nv; ++j) d += wv[j] * r[j] * b[j];
      coef[a] = d;
    }
    for (std::size_t j = 0; j < Nv; ++j) {
      std::complex<double> val{0, 0};
      for (int a = 0; a < 5; ++a) val += coef[a] * pbasis[a * Nv + j];
      r[j] = val;
    }
  }
}

std::complex<double> Projections::mass(const ModeState& s) const {
  std::complex<double> m{0, 0};
  for (int q = 0; q < s.Nx; ++q) {
    const std::complex<double>* r = s.row(q);
    std::complex<double> d{0, 0};
    for (std::size_t j = 0; j < Nv; ++j) d += wv[j] * r[j] * sqmu[j];
    m += wq[q] * d;
  }
  return m;
}

void Projections::apply_P0(ModeState& s) const {
  std::complex<double> m = mass(s) / mass_nrm;
  for (int q = 0; q < s.Nx; ++q) {
    std::complex<double>* r = s.row(q);
    for (std::size_t j = 0; j < Nv; ++j) r[j] = m * sqmu[j];
  }
}

void Projections::apply_Pn(ModeState& s, int n) const {
  if (n > n_max) throw std::invalid_argument("Pn order exceeds prepared basis");
  int nb = 2 * n + 1;
  // coef[b][j] = sum_q wq * trig[b][q] * F[q][j]
  std::vector<std::complex<double>> coef(static_cast<std::size_t>(nb) * Nv, {0, 0});
  for (int b = 0; b < nb; ++b) {
    const double* tb = trig.data() + b * Nx;
    std::complex<double>* cb = coef.data() + static_cast<std::size_t>(b) * Nv;
    for (int q = 0; q < Nx; ++q) {
      double wtb = wq[q] * tb[q];
      if (wtb == 0.0) continue;
      const std::complex<double>* r = s.row(q);
      for (std::size_t j = 0; j < Nv; ++j) cb[j] += wtb * r[j];
    }
  }
  for (int q = 0; q < Nx; ++q) {
    std::complex<double>* r = s.row(q);
    std::fill(r, r + Nv, std::complex<double>{0, 0});
    for (int b = 0; b < nb; ++b) {
      double tb = trig[b * Nx + q];
      const std::complex<double>* cb = coef.data() + static_cast<std::size_t>(b) * Nv;
      for (std::size_t j = 0; j < Nv; ++j) r[j] += tb * cb[j];
    }
  }
}

void apply_Ln(const ModeState& in, const CollisionOperator& op, const Projections& pr,
              int n, bool use_sym, ModeState& out) {
  out.Nx = in.Nx;
  out.Nv = in.Nv;
  out.a.resize(in.a.size());
  ModeState pn = in;
  if (n >= 0) pr.apply_Pn(pn, n);
  // out = L pn + nu (in - pn)
  for (int q = 0; q < in.Nx; ++q) {
    std::span<const std::complex<double>> src(pn.row(q), in.Nv);
    std::span<std::complex<double>> dst(out.row(q), in.Nv);
    if (use_sym)
      op.apply_L_sym(src, dst);
    else
      op.apply_L_raw(src, dst);
    if (n >= 0) {
      const std::complex<double>* fi = in.row(q);
      const std::complex<double>* fp = pn.row(q);
      std::complex<double>* o = out.row(q);
      for (std::size_t j = 0; j < in.Nv; ++j) o[j] += op.nu[j] * (fi[j] - fp[j]);
    }
  }
}

FiniteRankReport finite_rank_check(const CollisionOperator& op, const Projections& pr,
                                   const SlabGrid& sg, int n, std::uint64_t seed) {
  // apply K_n to random states; stack x3 profiles and measure the numerical
  // rank of the x3 factor via SVD
  int trials = 6;
  std::size_t Nv = op.n();
  int Nx = sg.Nx;
  Rng rng(seed);
  std::vector<double> cols;  // Nx x (Nv*trials), column-major by sample
  cols.reserve(static_cast<std::size_t>(Nx) * 64);
  int keep = 0;
  std::vector<double> mat;
  for (int t = 0; t < trials; ++t) {
    ModeState s(Nx, Nv);
    for (auto& z : s.a) z = {rng.normal(), rng.normal()};
    ModeState pn = s;
    pr.apply_Pn(pn, n);
    ModeState out(Nx, Nv);
    for (int q = 0; q < Nx; ++q) {
      std::span<const std::complex<double>> src(pn.row(q), Nv);
      std::span<std::complex<double>> dst(out.row(q), Nv);
      op.apply_K_raw(src, dst);
    }
    // subsample velocity columns
    for (std::size_t j = 0; j < Nv; j += std::max<std::size_t>(1, Nv / 24)) {
      for (int q = 0; q < Nx; ++q) {
        mat.push_back(out.row(q)[j].real());
      }
      ++keep;
      for (int q = 0; q < Nx; ++q) mat.push_back(out.row(q)[j].imag());
      ++keep;
    }
  }
  // mat is keep columns of length Nx (column-major)
  int m = Nx, nn = keep;
  std::vector<double> A = mat;
  std::vector<double> sv(std::min(m, nn));
  std::vector<double> superb(std::min(m, nn));
  LAPACKE_dgesvd(LAPACK_COL_MAJOR, 'N', 'N', m, nn, A.data(), m, sv.data(), nullptr, 1,
                 nullptr, 1, superb.data());
  FiniteRankReport rep;
  rep.n = n;
  rep.singvals = sv;
  int rank = 0;
  for (double s : sv)
    if (s > 1e-10 * sv[0]) ++rank;
  rep.rank = rank;
  return rep;
}

bool save_state(const ModeState& s, const std::string& path, const std::string& sidecar_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) return false;
  std::uint64_t nx = s.Nx, nv = s.Nv;
  os.write(reinterpret_cast<const char*>(&nx), 8);
  os.write(reinterpret_cast<const char*>(&nv), 8);
  os.write(reinterpret_cast<const char*>(s.a.data()),
           static_cast<std::streamsize>(s.a.size() * sizeof(std::complex<double>)));
  std::ofstream sj(path + ".json");
  sj << sidecar_json << "\n";
  return bool(os) && bool(sj);
}

bool load_state(ModeState& s, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  std::uint64_t nx = 0, nv = 0;
  is.read(reinterpret_cast<char*>(&nx), 8);
  is.read(reinterpret_cast<char*>(&nv), 8);
  s.Nx = static_cast<int>(nx);
  s.Nv = nv;
  s.a.resize(nx * nv);
  is.read(reinterpret_cast<char*>(s.a.data()),
          static_cast<std::streamsize>(s.a.size() * sizeof(std::complex<double>)));
  return bool(is);
}

}  // namespace kinslab
