#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "kinslab/krylov.hpp"
#include "kinslab/mode_operator.hpp"

namespace kinslab {

/// One Crank-Nicolson step of df/dt = B f on reduced vectors, matrix-free
/// (preconditioned GMRES per step).
class CrankNicolson {
 public:
  CrankNicolson(const ModeOperator& op, double dt, double tol = 1e-10);
  void step(std::vector<cplx>& f) const;
  double dt() const { return dt_; }

 private:
  const ModeOperator* op_;
  double dt_, tol_;
  std::unique_ptr<ShiftedSolver> solver_;  // (2/dt - B)
};

/// sigma_{q,m} = (d_par/2) (1/q - 1/2) + m/2.
struct DecayIndex {
  double q = 1.0;
  int m = 0;
  int d_par = 2;
  double value() const { return 0.5 * d_par * (1.0 / q - 0.5) + 0.5 * m; }
};

/// Radial horizontal-frequency grid with per-mode states: Plancherel
/// bookkeeping for radially symmetric data in d_par = 2 (or symmetric 1D).
struct FieldState {
  std::vector<double> kgrid;
  std::vector<double> kweight;  // radial Plancherel weights
  int d_par = 2;
  // per-mode reduced states are owned by the evolution driver
};

FieldState make_radial_field(int n_modes, double k_max, int d_par);

struct TrajectoryPoint {
  double t;
  double l2;        // Plancherel L^2_{x,v} norm
  double wsup;      // weighted sup diagnostic max w(v)|f|
  double heat_err;  // filled by heat_compare when a reference is attached
};

struct SlopeFit {
  double slope;
  double intercept;
  double window_lo, window_hi;
  int n_window;
};
/// log-log fit of series(t) ~ C (1+t)^slope over the window.
SlopeFit fit_loglog(std::span<const double> t, std::span<const double> y, double lo,
                    double hi);

struct LinearFieldRun {
  FieldState field;
  std::vector<double> times;
  std::vector<TrajectoryPoint> traj;
  // per-mode amplitude records for heat comparison
  std::vector<std::vector<double>> mode_norm2;   // [time][mode]
  std::vector<std::vector<cplx>> mode_rho;       // projection <f,sqmu>/||sqmu||^2
  std::vector<cplx> rho0;                        // initial P0 coefficient per mode
  std::vector<double> mode_norm2_0;
};

struct LinearRunConfig {
  int n_modes = 48;
  double k_max = 0.8;
  double T = 50.0;
  double dt0 = 0.05;
  double dt_max = 1.0;
  double dt_growth = 1.12;
  int samples = 24;
  int d_par = 2;
  bool project_out_P0 = false;  // initial data with P0 f0 = 0
  std::uint64_t seed = 12345;
  int threads = 2;
};

/// Per-mode initial profile: radial bump rho0(k) on the mass direction, or the
/// P0-complement variant. Evolves all modes, records Plancherel norms.
LinearFieldRun evolve_field(const CollisionOperator& op, const MaxwellianWeights& mw,
                            const SlabGrid& slab, int n_reg, const LinearRunConfig& cfg);

struct HeatCompareResult {
  std::vector<double> t;
  std::vector<double> err;       // || f - rho sqmu ||
  std::vector<double> sol;       // || f ||
  SlopeFit err_slope;
  SlopeFit sol_slope;
  double gap;                    // |err slope| - |sol slope|
};
HeatCompareResult heat_compare(const LinearFieldRun& run, double lambda_star,
                               double fit_lo, double fit_hi);

}  // namespace kinslab
