#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "kinslab/mode_operator.hpp"

namespace kinslab {

struct GmresResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

/// Restarted GMRES in the weighted inner product of the mode operator.
/// Solves op_apply(x) = rhs.
GmresResult gmres(const std::function<void(std::span<const cplx>, std::span<cplx>)>& op_apply,
                  const ModeOperator& ip, std::span<const cplx> rhs, std::span<cplx> x,
                  double tol, int restart = 80, int max_iters = 4000,
                  const std::function<void(std::span<const cplx>, std::span<cplx>)>& precond = {});

/// (sigma - B)^{-1} with a per-velocity banded preconditioner for the
/// transport + multiplication part.
class ShiftedSolver {
 public:
  ShiftedSolver(const ModeOperator& op, cplx sigma, bool adjoint = false);
  GmresResult solve(std::span<const cplx> rhs, std::span<cplx> x, double tol,
                    int restart = 80, int max_iters = 4000) const;
  cplx sigma() const { return sigma_; }

 private:
  const ModeOperator* op_;
  cplx sigma_;
  bool adjoint_;
  int kl_ = 2, ku_ = 2;
  std::vector<cplx> band_;        // per velocity banded LU factors
  std::vector<int> ipiv_;
  void precondition(std::span<const cplx> r, std::span<cplx> z) const;
};

struct EigResult {
  cplx lambda;
  std::vector<cplx> vec;  // reduced coordinates
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<cplx> ritz;  // diagnostics: all Ritz values of the last cycle
};

/// Shift-invert Arnoldi for the eigenvalue of B nearest `shift` (matrix-free;
/// inner solves via ShiftedSolver). `which_rightmost` picks the transformed
/// Ritz value mapping to the largest real part instead of nearest-shift.
EigResult arnoldi_shift_invert(const ModeOperator& op, cplx shift, double tol, int m = 40,
                               int max_restarts = 6, bool which_rightmost = true,
                               double inner_tol = 1e-10, bool adjoint = false);

/// Dense path: eigenvalues/vectors of the doubled real form via LAPACK dgeev.
struct DenseEig {
  std::vector<cplx> values;
  std::vector<cplx> right;  // column-major complex eigenvectors (reduced coords)
  std::size_t n = 0;
};
DenseEig dense_eigs(const ModeOperator& op, bool want_vectors);

}  // namespace kinslab
