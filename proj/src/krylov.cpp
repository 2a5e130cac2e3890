#include "kinslab/krylov.hpp"

#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kinslab {

GmresResult gmres(const std::function<void(std::span<const cplx>, std::span<cplx>)>& op_apply,
                  const ModeOperator& ip, std::span<const cplx> rhs, std::span<cplx> x,
                  double tol, int restart, int max_iters,
                  const std::function<void(std::span<const cplx>, std::span<cplx>)>& precond) {
  const std::size_t n = rhs.size();
  GmresResult res;
  std::vector<cplx> r(n), w(n), z(n);
  double bnorm;
  {
    std::vector<cplx> prhs(n);
    if (precond) {
      precond(rhs, prhs);
    } else {
      std::copy(rhs.begin(), rhs.end(), prhs.begin());
    }
    bnorm = ip.norm(prhs);
  }
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), cplx{0, 0});
    res.converged = true;
    return res;
  }
  int total = 0;
  while (total < max_iters) {
    // r = M^-1 (rhs - A x)
    op_apply(x, w);
    for (std::size_t i = 0; i < n; ++i) w[i] = rhs[i] - w[i];
    if (precond) {
      precond(w, r);
    } else {
      r = w;
    }
    double beta = ip.norm(r);
    res.residual = beta / bnorm;
    if (res.residual < tol) {
      res.converged = true;
      return res;
    }
    int m = restart;
    std::vector<std::vector<cplx>> V;
    V.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<cplx> cs(m), sn(m);
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
    g(0) = beta;
    int j = 0;
    for (; j < m && total < max_iters; ++j, ++total) {
      op_apply(V[j], w);
      if (precond) {
        precond(w, z);
      } else {
        z = w;
      }
      for (int i = 0; i <= j; ++i) {
        cplx h = ip.dot(z, V[i]);
        H(i, j) = h;
        for (std::size_t t = 0; t < n; ++t) z[t] -= h * V[i][t];
      }
      // one re-orthogonalization pass
      for (int i = 0; i <= j; ++i) {
        cplx h = ip.dot(z, V[i]);
        H(i, j) += h;
        for (std::size_t t = 0; t < n; ++t) z[t] -= h * V[i][t];
      }
      double hn = ip.norm(z);
      H(j + 1, j) = hn;
      V.emplace_back(n);
      if (hn > 0)
        for (std::size_t t = 0; t < n; ++t) V[j + 1][t] = z[t] / hn;
      // Givens
      for (int i = 0; i < j; ++i) {
        cplx t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -std::conj(sn[i]) * H(i, j) + std::conj(cs[i]) * H(i + 1, j);
        H(i, j) = t;
      }
      double d = std::sqrt(std::norm(H(j, j)) + std::norm(H(j + 1, j)));
      if (d == 0) {
        cs[j] = 1;
        sn[j] = 0;
      } else {
        cs[j] = std::conj(H(j, j)) / d;
        sn[j] = std::conj(H(j + 1, j)) / d;
      }
      cplx t = cs[j] * H(j, j) + sn[j] * H(j + 1, j);
      H(j, j) = t;
      H(j + 1, j) = 0;
      cplx gt = cs[j] * g(j) + sn[j] * g(j + 1);
      g(j + 1) = -std::conj(sn[j]) * g(j) + std::conj(cs[j]) * g(j + 1);
      g(j) = gt;
      res.residual = std::abs(g(j + 1)) / bnorm;
      res.iterations = total + 1;
      if (res.residual < tol) {
        ++j;
        ++total;
        break;
      }
    }
    // back substitution
    int k = j;
    Eigen::VectorXcd y(k);
    for (int i = k - 1; i >= 0; --i) {
      cplx s = g(i);
      for (int l = i + 1; l < k; ++l) s -= H(i, l) * y(l);
      y(i) = s / H(i, i);
    }
    for (int i = 0; i < k; ++i)
      for (std::size_t t = 0; t < n; ++t) x[t] += y(i) * V[i][t];
    if (res.residual < tol) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

ShiftedSolver::ShiftedSolver(const ModeOperator& op, cplx sigma, bool adjoint)
    : op_(&op), sigma_(sigma), adjoint_(adjoint) {
  // per-velocity banded factorization of (sigma +- (i k v1 + nu)) I +- v3 D
  const VelocityGrid& vg = op.vgrid();
  const SlabGrid& sg = op.slab();
  int Nx = sg.Nx;
  std::size_t Nv = vg.size();
  int ldab = 2 * kl_ + ku_ + 1;
  band_.assign(Nv * static_cast<std::size_t>(ldab) * Nx, cplx{0, 0});
  ipiv_.assign(Nv * static_cast<std::size_t>(Nx), 0);
  // assemble dense row stencils by probing (Nx small)
  auto dcol = [&](int sgn, int m, std::vector<double>& col) {
    col.assign(Nx, 0.0);
    double h = sg.h;
    auto add = [&](int q, int off, double c) {
      if (q + off == m) col[q] += c;
    };
    for (int q = 0; q < Nx; ++q) {
      switch (sg.scheme) {
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
  };
  std::vector<double> col;
  int ld = ldab;
  for (std::size_t j = 0; j < Nv; ++j) {
    double v3 = vg.nodes[j][2];
    cplx diag = sigma_;
    cplx sym = adjoint_ ? cplx(0, -op.symbol()[j]) : cplx(0, op.symbol()[j]);
    // (sigma - B)x: sigma + i k v1 + nu + v3 D ; adjoint: conj symbol, D -> D*
    // For preconditioning the adjoint we reuse the forward bands of -v3 sign.
    cplx* ab = band_.data() + j * static_cast<std::size_t>(ld) * Nx;
    int sgn = v3 > 0 ? +1 : -1;
    if (adjoint_) sgn = -sgn;  // crude surrogate for D^T
    for (int m = 0; m < Nx; ++m) {
      dcol(sgn, m, col);
      for (int q = 0; q < Nx; ++q) {
        if (col[q] == 0.0 && q != m) continue;
        int band_row = kl_ + ku_ + q - m;
        if (band_row < kl_ || band_row >= ld) continue;  // outside band
        cplx entry = v3 * col[q];
        if (q == m) entry += diag + sym + op.collision().nu[j];
        ab[static_cast<std::size_t>(m) * ld + band_row] = entry;
      }
    }
    int info = LAPACKE_zgbtrf(LAPACK_COL_MAJOR, Nx, Nx, kl_, ku_,
                              reinterpret_cast<lapack_complex_double*>(ab), ld,
                              ipiv_.data() + j * Nx);
    if (info != 0) throw std::runtime_error("banded factorization failed");
  }
}

void ShiftedSolver::precondition(std::span<const cplx> r, std::span<cplx> z) const {
  const VelocityGrid& vg = op_->vgrid();
  const SlabGrid& sg = op_->slab();
  int Nx = sg.Nx;
  std::size_t Nv = vg.size();
  int ld = 2 * kl_ + ku_ + 1;
  // scatter reduced -> full with zeros in the slaved slots (keeps the
  // preconditioner block-diagonal per velocity), solve, restrict
  ModeState G(Nx, Nv);
  op_->embed(r, G);
  for (std::size_t j = 0; j < Nv; ++j) {
    if (vg.nodes[j][2] > 0) G.row(0)[j] = 0;
    if (vg.nodes[j][2] < 0) G.row(Nx - 1)[j] = 0;
  }
  std::vector<cplx> rhs(Nx);
  for (std::size_t j = 0; j < Nv; ++j) {
    for (int q = 0; q < Nx; ++q) rhs[q] = G.row(q)[j];
    const cplx* ab = band_.data() + j * static_cast<std::size_t>(ld) * Nx;
    LAPACKE_zgbtrs(LAPACK_COL_MAJOR, 'N', Nx, kl_, ku_, 1,
                   reinterpret_cast<const lapack_complex_double*>(ab), ld,
                   ipiv_.data() + j * Nx, reinterpret_cast<lapack_complex_double*>(rhs.data()),
                   Nx);
    for (int q = 0; q < Nx; ++q) G.row(q)[j] = rhs[q];
  }
  op_->restrict_(G, z);
}

GmresResult ShiftedSolver::solve(std::span<const cplx> rhs, std::span<cplx> x, double tol,
                                 int restart, int max_iters) const {
  auto apply = [this](std::span<const cplx> in, std::span<cplx> out) {
    if (!adjoint_) {
      op_->apply(in, out);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigma_ * in[i] - out[i];
    } else {
      op_->apply_adjoint(in, out);
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::conj(sigma_) * in[i] - out[i];
    }
  };
  auto pc = [this](std::span<const cplx> in, std::span<cplx> out) { precondition(in, out); };
  return gmres(apply, *op_, rhs, x, tol, restart, max_iters, pc);
}

EigResult arnoldi_shift_invert(const ModeOperator& op, cplx shift, double tol, int m,
                               int max_restarts, bool which_rightmost, double inner_tol,
                               bool adjoint) {
  const std::size_t n = op.reduced_size();
  ShiftedSolver solver(op, shift, adjoint);
  EigResult out;
  std::vector<cplx> v0(n);
  // start vector: sqrt(mu) (constant in x3), the expected leading direction
  const auto& sq = op.sqmu_reduced();
  for (std::size_t i = 0; i < n; ++i) v0[i] = sq[i];
  double nn = op.norm(v0);
  for (auto& z : v0) z /= nn;

  for (int cycle = 0; cycle < max_restarts; ++cycle) {
    std::vector<std::vector<cplx>> V;
    V.push_back(v0);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<cplx> w(n);
    int built = 0;
    for (int j = 0; j < m; ++j) {
      GmresResult g = solver.solve(V[j], w, inner_tol);
      if (!g.converged && g.residual > 1e-6) {
        // near-singular shift: report with best effort
      }
      out.iterations += g.iterations;
      for (int i = 0; i <= j; ++i) {
        cplx h = op.dot(w, V[i]);
        H(i, j) = h;
        for (std::size_t t = 0; t < n; ++t) w[t] -= h * V[i][t];
      }
      for (int i = 0; i <= j; ++i) {  // re-orthogonalize
        cplx h = op.dot(w, V[i]);
        H(i, j) += h;
        for (std::size_t t = 0; t < n; ++t) w[t] -= h * V[i][t];
      }
      double hn = op.norm(w);
      H(j + 1, j) = hn;
      built = j + 1;
      if (hn < 1e-13) break;
      V.emplace_back(n);
      for (std::size_t t = 0; t < n; ++t) V[j + 1][t] = w[t] / hn;
    }
    Eigen::MatrixXcd Hs = H.topLeftCorner(built, built);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Hs);
    // pick Ritz value
    int best = 0;
    double bestval = -1e300;
    out.ritz.clear();
    for (int i = 0; i < built; ++i) {
      cplx theta = es.eigenvalues()(i);
      if (std::abs(theta) < 1e-14) continue;
      cplx lam = shift - 1.0 / theta;
      out.ritz.push_back(lam);
      double score = which_rightmost ? lam.real() : -std::abs(lam - shift);
      if (score > bestval) {
        bestval = score;
        best = i;
      }
    }
    cplx theta = es.eigenvalues()(best);
    out.lambda = shift - 1.0 / theta;
    // assemble eigenvector
    out.vec.assign(n, cplx{0, 0});
    for (int i = 0; i < built; ++i) {
      cplx c = es.eigenvectors()(i, best);
      for (std::size_t t = 0; t < n; ++t) out.vec[t] += c * V[i][t];
    }
    double vn = op.norm(out.vec);
    for (auto& z : out.vec) z /= vn;
    // residual ||B v - lambda v|| / ||v||
    std::vector<cplx> Bv(n);
    if (!adjoint)
      op.apply(out.vec, Bv);
    else
      op.apply_adjoint(out.vec, Bv);
    double rn = 0;
    {
      std::vector<cplx> r(n);
      for (std::size_t t = 0; t < n; ++t) r[t] = Bv[t] - out.lambda * out.vec[t];
      rn = op.norm(r);
    }
    out.residual = rn;
    if (rn < tol) {
      out.converged = true;
      return out;
    }
    v0 = out.vec;  // restart from the best Ritz vector
  }
  return out;
}

DenseEig dense_eigs(const ModeOperator& op, bool want_vectors) {
  std::vector<double> A = op.dense_real();
  std::size_t n = op.reduced_size();
  int N2 = static_cast<int>(2 * n);
  std::vector<double> wr(N2), wi(N2);
  std::vector<double> vr(want_vectors ? static_cast<std::size_t>(N2) * N2 : 1);
  int info = LAPACKE_dgeev(LAPACK_ROW_MAJOR, 'N', want_vectors ? 'V' : 'N', N2, A.data(), N2,
                           wr.data(), wi.data(), nullptr, N2,
                           want_vectors ? vr.data() : nullptr, N2);
  if (info != 0) throw std::runtime_error("dgeev failed");
  DenseEig out;
  out.n = n;
  out.values.resize(N2);
  for (int i = 0; i < N2; ++i) out.values[i] = cplx(wr[i], wi[i]);
  if (want_vectors) {
    out.right.assign(static_cast<std::size_t>(N2) * n, cplx{0, 0});
    for (int c = 0; c < N2; ++c) {
      bool pair = (c + 1 < N2) && wi[c] > 0;
      for (std::size_t r = 0; r < n; ++r) {
        double re_lo = vr[r * N2 + c];
        double im_lo = pair ? vr[r * N2 + c + 1] : 0.0;
        double re_hi = vr[(r + n) * N2 + c];
        double im_hi = pair ? vr[(r + n) * N2 + c + 1] : 0.0;
        // real-form vector [xr; xi] (+ i * partner when complex pair):
        // complex reduced vector x = (xr + i xi)
        out.right[static_cast<std::size_t>(c) * n + r] =
            cplx(re_lo, re_hi) + cplx(0, 1) * cplx(im_lo, im_hi);
      }
    }
  }
  return out;
}

}  // namespace kinslab
