#include "kinslab/mode_operator.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace kinslab {

namespace {
// out(2R x N) = G(2R x N) * L^T via dgemm; G rows are re/im planes of x rows.
void mat_apply_rows(const std::vector<double>& L, std::size_t N, const double* G,
                    double* OUT, int rows) {
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, rows, static_cast<int>(N),
              static_cast<int>(N), 1.0, G, static_cast<int>(N), L.data(),
              static_cast<int>(N), 0.0, OUT, static_cast<int>(N));
}
}  // namespace

ModeOperator::ModeOperator(const CollisionOperator& op, const MaxwellianWeights& mw,
                           SlabGrid slab, double k, int n_reg, bool use_sym_L, WallBc bc)
    : ModeOperator(op, mw, std::move(slab), k, 0.0, n_reg, use_sym_L, bc) {}

ModeOperator::ModeOperator(const CollisionOperator& op, const MaxwellianWeights& mw,
                           SlabGrid slab, double k1, double k2, int n_reg, bool use_sym_L,
                           WallBc bc)
    : op_(&op),
      mw_(mw),
      slab_(std::move(slab)),
      pr_(Projections::make(op.grid, mw, slab_, std::max(0, n_reg))),
      k_(std::sqrt(k1 * k1 + k2 * k2)),
      n_reg_(n_reg),
      use_sym_(use_sym_L),
      bc_(bc) {
  Nv_ = op.grid.size();
  const VelocityGrid& vg = op.grid;
  int Nx = slab_.Nx;
  slots_.reserve(static_cast<std::size_t>(Nx) * Nv_);
  for (int q = 0; q < Nx; ++q)
    for (std::size_t j = 0; j < Nv_; ++j) {
      double v3 = vg.nodes[j][2];
      bool slaved = (q == 0 && v3 > 0) || (q == Nx - 1 && v3 < 0);
      if (!slaved) slots_.push_back(static_cast<std::size_t>(q) * Nv_ + j);
    }
  nred_ = slots_.size();
  wred_.resize(nred_);
  sqmu_red_.resize(nred_);
  for (std::size_t s = 0; s < nred_; ++s) {
    std::size_t full = slots_[s];
    int q = static_cast<int>(full / Nv_);
    std::size_t j = full % Nv_;
    wred_[s] = slab_.wq[q] * vg.w[j];
    sqmu_red_[s] = mw_.sqrt_mu[j];
  }
  symb_.resize(Nv_);
  for (std::size_t j = 0; j < Nv_; ++j)
    symb_[j] = k1 * vg.nodes[j][0] + k2 * vg.nodes[j][1];
  Ldense_ = &op.dense_L(use_sym_);
}

void ModeOperator::bc_fill(ModeState& F) const {
  if (bc_ == WallBc::diffuse) {
    apply_Pgamma(F, op_->grid, mw_);
  } else {
    const VelocityGrid& vg = op_->grid;
    std::complex<double>* r0 = F.row(0);
    std::complex<double>* rN = F.row(F.Nx - 1);
    for (std::size_t j = 0; j < Nv_; ++j) {
      if (vg.nodes[j][2] > 0) r0[j] = 0;
      if (vg.nodes[j][2] < 0) rN[j] = 0;
    }
  }
}

void ModeOperator::embed(std::span<const cplx> xr, ModeState& F) const {
  F.Nx = slab_.Nx;
  F.Nv = Nv_;
  F.a.assign(full_size(), cplx{0, 0});
  for (std::size_t s = 0; s < nred_; ++s) F.a[slots_[s]] = xr[s];
  bc_fill(F);
}

void ModeOperator::restrict_(const ModeState& F, std::span<cplx> xr) const {
  for (std::size_t s = 0; s < nred_; ++s) xr[s] = F.a[slots_[s]];
}

void ModeOperator::apply_full(const ModeState& F, ModeState& out) const {
  int Nx = slab_.Nx;
  out.Nx = Nx;
  out.Nv = Nv_;
  out.a.resize(F.a.size());
  const VelocityGrid& vg = op_->grid;
  // transport
  ModeState T;
  apply_transport(F, vg, slab_, T);
  // collision input: P_n F when regularized
  ModeState pn;
  const ModeState* cin = &F;
  if (n_reg_ >= 0) {
    pn = F;
    pr_.apply_Pn(pn, n_reg_);
    cin = &pn;
  }
  // L applied to all rows via one dgemm on the re/im planes
  std::vector<double> G(static_cast<std::size_t>(2 * Nx) * Nv_);
  for (int q = 0; q < Nx; ++q) {
    const cplx* r = cin->row(q);
    double* gr = G.data() + static_cast<std::size_t>(2 * q) * Nv_;
    double* gi = gr + Nv_;
    for (std::size_t j = 0; j < Nv_; ++j) {
      gr[j] = r[j].real();
      gi[j] = r[j].imag();
    }
  }
  std::vector<double> LG(G.size());
  mat_apply_rows(*Ldense_, Nv_, G.data(), LG.data(), 2 * Nx);
  for (int q = 0; q < Nx; ++q) {
    const cplx* f = F.row(q);
    const cplx* t = T.row(q);
    const double* lr = LG.data() + static_cast<std::size_t>(2 * q) * Nv_;
    const double* li = lr + Nv_;
    cplx* o = out.row(q);
    for (std::size_t j = 0; j < Nv_; ++j) {
      cplx lf{lr[j], li[j]};
      if (n_reg_ >= 0) lf += op_->nu[j] * (f[j] - cin->row(q)[j]);
      o[j] = cplx(0, -symb_[j]) * f[j] - t[j] - lf;
    }
  }
}

void ModeOperator::apply(std::span<const cplx> x, std::span<cplx> y) const {
  ModeState F, out;
  embed(x, F);
  apply_full(F, out);
  for (std::size_t s = 0; s < nred_; ++s) y[s] = out.a[slots_[s]];
}

void ModeOperator::bc_fill_adjoint(ModeState& G) const {
  // adjoint of the BC fill map C (see apply_adjoint): writes the incoming-slot
  // dependences back onto the outgoing slots, then zeroes the incoming slots.
  const VelocityGrid& vg = op_->grid;
  if (bc_ == WallBc::diffuse) {
    cplx* r0 = G.row(0);
    cplx* rN = G.row(G.Nx - 1);
    cplx aL{0, 0}, aR{0, 0};
    for (std::size_t j = 0; j < Nv_; ++j) {
      double v3 = vg.nodes[j][2];
      if (v3 > 0) aL += vg.w[j] * mw_.sqrt_mu[j] * r0[j];
      if (v3 < 0) aR += vg.w[j] * mw_.sqrt_mu[j] * rN[j];
    }
    for (std::size_t j = 0; j < Nv_; ++j) {
      double v3 = vg.nodes[j][2];
      if (v3 < 0) r0[j] += mw_.c_half * mw_.sqrt_mu[j] * (-v3) * aL;
      if (v3 > 0) rN[j] += mw_.c_half * mw_.sqrt_mu[j] * v3 * aR;
    }
    for (std::size_t j = 0; j < Nv_; ++j) {
      double v3 = vg.nodes[j][2];
      if (v3 > 0) r0[j] = 0;
      if (v3 < 0) rN[j] = 0;
    }
  } else {
    cplx* r0 = G.row(0);
    cplx* rN = G.row(G.Nx - 1);
    for (std::size_t j = 0; j < Nv_; ++j) {
      if (vg.nodes[j][2] > 0) r0[j] = 0;
      if (vg.nodes[j][2] < 0) rN[j] = 0;
    }
  }
}

void ModeOperator::apply_full_adjoint(const ModeState& F, ModeState& out) const {
  int Nx = slab_.Nx;
  out.Nx = Nx;
  out.Nv = Nv_;
  out.a.resize(F.a.size());
  const VelocityGrid& vg = op_->grid;
  // adjoint transport: (v3 D)^* = v3 P^{-1} D^T P per sign
  ModeState T(Nx, Nv_);
  {
    // build D^T action: out_q = (1/wq_q) sum_m D[m][q] wq_m F_m, per sign
    // reuse apply_transport by transposing stencils manually
    // stencil rows as in slab.cpp; reconstruct here
    // We apply: T[q][j] = v3_j * sum_m stencil_sgn.rows[m] contributions.
    // For simplicity assemble transposed stencil tables once per call.
    struct Entry {
      int src;
      double c;
    };
    static thread_local std::vector<std::vector<Entry>> tp, tn;
    static thread_local int cachedNx = -1;
    static thread_local SlabScheme cachedScheme{};
    static thread_local double cachedH = 0;
    if (cachedNx != Nx || cachedScheme != slab_.scheme || cachedH != slab_.h) {
      auto build = [&](int sgn) {
        std::vector<std::vector<Entry>> t(Nx);
        // replicate the forward stencils by probing basis vectors (Nx is
        // small; exact and scheme-agnostic)
        std::vector<double> d(Nx, 0.0);
        for (int m = 0; m < Nx; ++m) {
          for (int q = 0; q < Nx; ++q) d[q] = 0;
          // stencils identical to slab.cpp
          double h = slab_.h;
          auto add = [&](int q, int off, double c) {
            int src = q + off;
            if (src >= 0 && src < Nx && src == m) d[q] += c;
          };
          for (int q = 0; q < Nx; ++q) {
            switch (slab_.scheme) {
              case SlabScheme::central_sbp_order2:
                if (q == 0) {
                  add(q, 0, -1.0 / h);
                  add(q, 1, 1.0 / h);
                } else if (q == Nx - 1) {
                  add(q, -1, -1.0 / h);
                  add(q, 0, 1.0 / h);
                } else {
                  add(q, -1, -0.5 / h);
                  add(q, 1, 0.5 / h);
                }
                break;
              case SlabScheme::upwind_fd_order1:
                if (sgn > 0) {
                  if (q == 0) {
                    add(q, 0, -1.0 / h);
                    add(q, 1, 1.0 / h);
                  } else {
                    add(q, -1, -1.0 / h);
                    add(q, 0, 1.0 / h);
                  }
                } else {
                  if (q == Nx - 1) {
                    add(q, -1, -1.0 / h);
                    add(q, 0, 1.0 / h);
                  } else {
                    add(q, 0, -1.0 / h);
                    add(q, 1, 1.0 / h);
                  }
                }
                break;
              case SlabScheme::upwind_fd_order2:
                if (sgn > 0) {
                  if (q >= 2) {
                    add(q, 0, 1.5 / h);
                    add(q, -1, -2.0 / h);
                    add(q, -2, 0.5 / h);
                  } else if (q == 1) {
                    add(q, -1, -0.5 / h);
                    add(q, 1, 0.5 / h);
                  } else {
                    add(q, 0, -1.5 / h);
                    add(q, 1, 2.0 / h);
                    add(q, 2, -0.5 / h);
                  }
                } else {
                  if (q <= Nx - 3) {
                    add(q, 0, -1.5 / h);
                    add(q, 1, 2.0 / h);
                    add(q, 2, -0.5 / h);
                  } else if (q == Nx - 2) {
                    add(q, -1, -0.5 / h);
                    add(q, 1, 0.5 / h);
                  } else {
                    add(q, 0, 1.5 / h);
                    add(q, -1, -2.0 / h);
                    add(q, -2, 0.5 / h);
                  }
                }
                break;
            }
          }
          // d[q] = D[q][m]; transpose with weights: (D^* x)[m] = (1/w_m) sum_q D[q][m] w_q x[q]
          for (int q = 0; q < Nx; ++q)
            if (d[q] != 0.0) t[m].push_back({q, d[q] * slab_.wq[q] / slab_.wq[m]});
        }
        return t;
      };
      tp = build(+1);
      tn = build(-1);
      cachedNx = Nx;
      cachedScheme = slab_.scheme;
      cachedH = slab_.h;
    }
    for (int m = 0; m < Nx; ++m) {
      cplx* o = T.row(m);
      for (std::size_t j = 0; j < Nv_; ++j) {
        double v3 = vg.nodes[j][2];
        const auto& lst = (v3 > 0 ? tp : tn)[m];
        cplx d{0, 0};
        for (const auto& e : lst) d += e.c * F.row(e.src)[j];
        o[j] = v3 * d;
      }
    }
  }
  // adjoint collision: L_sym is self-adjoint in the w metric; L_raw adjoint is
  // D_w^{-1} L^T D_w. Adjoint of P_n composition: P_n L* (P_n self-adjoint).
  std::vector<double> G(static_cast<std::size_t>(2 * Nx) * Nv_);
  for (int q = 0; q < Nx; ++q) {
    const cplx* r = F.row(q);
    double* gr = G.data() + static_cast<std::size_t>(2 * q) * Nv_;
    double* gi = gr + Nv_;
    for (std::size_t j = 0; j < Nv_; ++j) {
      gr[j] = vg.w[j] * r[j].real();
      gi[j] = vg.w[j] * r[j].imag();
    }
  }
  std::vector<double> LG(G.size());
  // multiply by L (not transposed) on the right: out = G * L -> (L^T g)
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, 2 * slab_.Nx,
              static_cast<int>(Nv_), static_cast<int>(Nv_), 1.0, G.data(),
              static_cast<int>(Nv_), Ldense_->data(), static_cast<int>(Nv_), 0.0, LG.data(),
              static_cast<int>(Nv_));
  ModeState Ls(Nx, Nv_);
  for (int q = 0; q < Nx; ++q) {
    double* lr = LG.data() + static_cast<std::size_t>(2 * q) * Nv_;
    double* li = lr + Nv_;
    cplx* o = Ls.row(q);
    for (std::size_t j = 0; j < Nv_; ++j) o[j] = cplx{lr[j], li[j]} / vg.w[j];
  }
  if (n_reg_ >= 0) {
    ModeState LsP = Ls;
    pr_.apply_Pn(LsP, n_reg_);
    // nu-part adjoint: (nu (I-P_n))^* = (I-P_n)(nu .)
    ModeState nf(Nx, Nv_);
    for (int q = 0; q < Nx; ++q) {
      const cplx* f = F.row(q);
      cplx* o = nf.row(q);
      for (std::size_t j = 0; j < Nv_; ++j) o[j] = op_->nu[j] * f[j];
    }
    ModeState nfp = nf;
    pr_.apply_Pn(nfp, n_reg_);
    for (std::size_t t = 0; t < Ls.a.size(); ++t) Ls.a[t] = LsP.a[t] + nf.a[t] - nfp.a[t];
  }
  // symbol adjoint: conj(-i k v1) = +i k v1
  for (int q = 0; q < Nx; ++q) {
    const cplx* f = F.row(q);
    const cplx* t = T.row(q);
    const cplx* l = Ls.row(q);
    cplx* o = out.row(q);
    for (std::size_t j = 0; j < Nv_; ++j)
      o[j] = cplx(0, symb_[j]) * f[j] - t[j] - l[j];
  }
}

void ModeOperator::apply_adjoint(std::span<const cplx> x, std::span<cplx> y) const {
  // T_red = R M C E0 ; T* = E0* C* M* R*
  ModeState G(slab_.Nx, Nv_);
  for (std::size_t s = 0; s < nred_; ++s) G.a[slots_[s]] = x[s];  // R*
  ModeState MG;
  apply_full_adjoint(G, MG);  // M*
  bc_fill_adjoint(MG);        // C*
  for (std::size_t s = 0; s < nred_; ++s) y[s] = MG.a[slots_[s]];  // E0*
}

cplx ModeOperator::dot(std::span<const cplx> a, std::span<const cplx> b) const {
  cplx s{0, 0};
  for (std::size_t i = 0; i < nred_; ++i) s += wred_[i] * a[i] * std::conj(b[i]);
  return s;
}

double ModeOperator::norm(std::span<const cplx> a) const {
  double s = 0;
  for (std::size_t i = 0; i < nred_; ++i) s += wred_[i] * std::norm(a[i]);
  return std::sqrt(s);
}

cplx ModeOperator::mass(std::span<const cplx> x) const {
  ModeState F;
  embed(x, F);
  return pr_.mass(F);
}

std::vector<double> ModeOperator::dense_real() const {
  std::size_t n = nred_;
  std::vector<double> A(4 * n * n);
  std::vector<cplx> e(n, cplx{0, 0}), y(n);
  for (std::size_t j = 0; j < 2 * n; ++j) {
    std::fill(e.begin(), e.end(), cplx{0, 0});
    if (j < n)
      e[j] = cplx{1, 0};
    else
      e[j - n] = cplx{0, 1};
    apply(e, y);
    for (std::size_t i = 0; i < n; ++i) {
      A[i * 2 * n + j] = y[i].real();
      A[(i + n) * 2 * n + j] = y[i].imag();
    }
  }
  return A;
}

}  // namespace kinslab
