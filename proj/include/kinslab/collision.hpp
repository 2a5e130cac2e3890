#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kinslab/velocity.hpp"

namespace kinslab {

/// Hard-sphere collision frequency nu(v) = 2*pi * E|v - U|, U ~ mu
/// (closed radial reduction; erf form).
double nu_closed_form(double speed);

/// The spec'd grid-quadrature estimate nu(v) = 2*pi sum_j w_j |v - v_j| mu(v_j).
double compute_nu_at(const std::array<double, 3>& v, const VelocityGrid& grid);
std::vector<double> compute_nu(const VelocityGrid& grid);

/// Grad-reduction kernel constants, fitted from the continuum identity
/// int k(v,u) sqrt(mu(u)) du = nu(v) sqrt(mu(v)) at probe speeds.
struct KernelConstants {
  double c1 = 0.0;  // loss part: c1 |v-u| e^{-(|v|^2+|u|^2)/4}
  double c2 = 0.0;  // gain part: c2 |v-u|^{-1} e^{-|v-u|^2/8 - (|v|^2-|u|^2)^2/(8|v-u|^2)}
  double fit_residual = 0.0;
};
KernelConstants fit_kernel_constants();

/// Pointwise kernel value k(v,u) = gain - loss.
double kernel_value(const KernelConstants& kc, const std::array<double, 3>& v,
                    const std::array<double, 3>& u);

struct OracleReport {
  KernelConstants constants;
  double null_rel[5] = {0, 0, 0, 0, 0};  // 1, v1, v2, v3, |v|^2 (raw operator)
  double tol_K = 0.0;                    // max of the above
  double raw_kernel_asym = 0.0;          // relative asymmetry of the raw kernel values
  double sym_kernel_asym = 0.0;          // of the symmetrized variant (machine level)
  double self_adjoint_defect = 0.0;      // symmetrized variant, w-metric
  double nu0_estimate = 0.0;
  double rho_hat = 0.0;                  // fitted Gaussian decay rate of |k|
  double gap_velocity = 0.0;             // 6th smallest eigenvalue of symmetrized L
  double min_eig = 0.0;                  // smallest eigenvalue (PSD check)
  double kernel_null_angle = 0.0;        // principal-angle defect of the 5-dim null space
  std::vector<double> mc_probe_rel;      // per probe node |K_h f - K_mc f| / |K_mc f|
  double mc_probe_max = 0.0;
  std::uint64_t mc_samples = 0;
  std::string to_json() const;
};

struct AssemblyOptions {
  int duffy_nt = 10;
  int duffy_ns = 8;
  int ord_near = 8;   // cells closer than 1.8 cell widths
  int ord_mid = 6;    // closer than 3.2
  int ord_far = 4;
  double skip_radius = 12.0;  // drop cells entirely beyond this distance
  bool run_spectrum = true;   // dsyev on the symmetrized operator (report fields)
  int threads = 0;            // 0 = hardware
};

/// Dense collision operator on a velocity grid. Two faces:
///  - raw: product-integration collocation rows (validated: null relations,
///    Monte Carlo probes); apply_K_raw / apply_L_raw.
///  - sym: kernel-projected, exactly self-adjoint variant used by the
///    spectral machinery; apply_L_sym.
class CollisionOperator {
 public:
  VelocityGrid grid;
  std::vector<double> nu;      // closed-form nu at nodes
  std::vector<double> Kraw;    // row-major N x N apply matrix
  std::vector<double> Tsym;    // symmetric coords: sqrt(w) L sqrt(w)^{-1}, N x N
  std::vector<double> sqrtw;   // sqrt of quadrature weights
  OracleReport report;
  mutable std::vector<double> Lsym_cache_, Lraw_cache_;

  std::size_t n() const { return grid.size(); }

  void apply_K_raw(std::span<const std::complex<double>> f,
                   std::span<std::complex<double>> out) const;
  void apply_L_raw(std::span<const std::complex<double>> f,
                   std::span<std::complex<double>> out) const;
  /// Symmetrized + kernel-projected L (the spectral variant).
  void apply_L_sym(std::span<const std::complex<double>> f,
                   std::span<std::complex<double>> out) const;
  void apply_L_sym_real(std::span<const double> f, std::span<double> out) const;

  /// Symmetrized kernel-value matrix entry (nu*I - L_sym)_{ij}/w_j.
  double kernel_sym(std::size_t i, std::size_t j) const;

  /// Dense nodal L matrix (row-major), built lazily and shared by all mode
  /// operators: sym ? projected-symmetrized variant : diag(nu) - Kraw.
  const std::vector<double>& dense_L(bool sym) const;

  bool save(const std::string& path) const;
  static bool load(const std::string& path, CollisionOperator& op);
};

CollisionOperator assemble_collision(const VelocityGrid& grid,
                                     const AssemblyOptions& opt = {});

/// Monte Carlo oracle: evaluates the defining (u, omega) double integral of
/// Kf at node v for closed-form f. Returns the estimate and its standard error.
struct McEstimate {
  double value;
  double stderr_;
};
McEstimate mc_kernel_oracle(const std::array<double, 3>& v,
                            double (*f)(const std::array<double, 3>&),
                            std::uint64_t samples, std::uint64_t seed,
                            const KernelConstants& kc, int threads = 1);

/// Runs the criterion-2 probe: f = v1^2 e^{-|v|^2/2} at `n_probe` nodes.
void validate_against_mc(CollisionOperator& op, int n_probe,
                         std::uint64_t samples, std::uint64_t seed, int threads);

struct KthetaDiagnostics {
  double theta;
  double C_theta_hat;             // max_i S_i (1+|v_i|)
  bool all_rows_positive;
  std::vector<double> tail_N;     // probed N values
  std::vector<double> tail_sum;   // max_i of restricted |k_theta| sums
  double tail_C;                  // fitted constant: max over N of N * tail_sum
  std::string to_json() const;
};
KthetaDiagnostics ktheta_profile(const CollisionOperator& op, double theta);

}  // namespace kinslab
