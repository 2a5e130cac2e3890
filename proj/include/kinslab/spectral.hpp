#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kinslab/krylov.hpp"
#include "kinslab/mode_operator.hpp"

namespace kinslab {

/// (sigma + i tau - B)^{-1} rhs via preconditioned GMRES.
struct ResolventResult {
  std::vector<cplx> x;
  GmresResult info;
};
ResolventResult solve_resolvent(const ModeOperator& op, cplx lambda,
                                std::span<const cplx> rhs, double tol);

/// Leading eigenpair of B near `shift`; dense below `dense_threshold` reduced
/// unknowns (doubled real dgeev), otherwise shift-invert Arnoldi.
EigResult leading_eigenpair(const ModeOperator& op, cplx shift, double tol,
                            std::size_t dense_threshold = 6000);

/// Stationary corrector: v3 d/dx G1 + L G1 = -i v1 sqrt(mu), zero inflow, and
/// the diffusion coefficient computed two ways.
struct G1Solution {
  ModeState G1;                 // full state
  std::vector<cplx> G1_red;     // reduced coordinates (zero-inflow operator)
  double lambda_star_dirichlet; // 1/4 |G1|^2_{gamma+} + 1/2 Re<L G1, G1>
  double lambda_star_moment;    // (i/2) <v1 G1, sqmu>
  double route_rel_diff;
  double re_fraction;           // ||Re G1|| / ||G1||
  double mass_resid;            // |<G1, sqmu>|
  GmresResult solver;
};
G1Solution solve_G1(const CollisionOperator& op, const MaxwellianWeights& mw,
                    const SlabGrid& slab_central, int n_reg, bool use_sym, double tol);

struct G2Solution {
  ModeState G2;
  cplx gamma;
  cplx eta;                 // lambda_star + gamma
  cplx candidate_lambda;    // -eta k^2
  int iters = 0;
  double fixed_point_resid = 0.0;
  double series_residual = 0.0;     // ||(B + eta0 k^2) f_series|| with first-iterate G2
  double converged_residual = 0.0;  // same with the converged pair
  bool converged = false;
};
G2Solution solve_G2_fixed_point(const ModeOperator& op_diffuse, const G1Solution& g1,
                                double k, double tol, int max_iters = 60,
                                double ball_guard = 1e4);

struct BranchPoint {
  double k;
  cplx lambda;
  double residual;
};
struct DispersionFit {
  double lambda_star_fit;
  double C_fit;
  double fit_residual;
  std::vector<double> loo_lambda_star;  // leave-one-out stability
};
DispersionFit fit_dispersion(const std::vector<BranchPoint>& branch);

struct SemigroupSplit {
  std::vector<double> t;
  std::vector<double> remainder;
  double c0_measured;     // fitted exponential remainder rate
  double lambda_re;       // Re lambda(k)
  double proj_dist;       // ||Pi - P0|| on a state basis
  bool remainder_dominates; // c0 > |Re lambda|
};
SemigroupSplit measure_semigroup_split(const ModeOperator& op, const EigResult& eig,
                                       std::span<const double> tgrid, double dt_cn,
                                       std::uint64_t seed);

/// Evolves f0 at k > kappa_probe and fits an exponential decay rate.
double probe_large_k_decay(const ModeOperator& op, std::span<const double> tgrid,
                           double dt_cn);

/// Randomized resolvent-norm estimate at sigma + i tau.
double resolvent_norm_estimate(const ModeOperator& op, cplx lambda, int probes,
                               std::uint64_t seed, double tol);

}  // namespace kinslab
