#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "kinslab/collision.hpp"
#include "kinslab/velocity.hpp"

namespace kinslab {

enum class SlabScheme { upwind_fd_order1, upwind_fd_order2, central_sbp_order2 };
std::string to_string(SlabScheme s);
SlabScheme slab_scheme_from_string(const std::string& s);

/// x3 discretization of [-1,1]: vertex grid including the wall nodes, with
/// trapezoid quadrature weights. Wall rows are q=0 (x=-1) and q=Nx-1 (x=+1);
/// the incoming velocity half at each wall is slaved to the boundary
/// condition, all stencils are one-sided at the closure rows.
struct SlabGrid {
  int Nx = 0;
  double h = 0.0;
  SlabScheme scheme = SlabScheme::upwind_fd_order2;
  std::vector<double> x;   // nodes
  std::vector<double> wq;  // trapezoid weights

  static SlabGrid make(int Nx, SlabScheme scheme);
};

/// Complex field F(x3, v): row-major x3-major layout.
struct ModeState {
  int Nx = 0;
  std::size_t Nv = 0;
  std::vector<std::complex<double>> a;

  ModeState() = default;
  ModeState(int nx, std::size_t nv) : Nx(nx), Nv(nv), a(static_cast<std::size_t>(nx) * nv) {}
  std::complex<double>* row(int q) { return a.data() + static_cast<std::size_t>(q) * Nv; }
  const std::complex<double>* row(int q) const {
    return a.data() + static_cast<std::size_t>(q) * Nv;
  }
};

/// v3 * d/dx3 with upwind (or central SBP) stencils; assumes the state's wall
/// rows already hold boundary-consistent values.
void apply_transport(const ModeState& in, const VelocityGrid& vg, const SlabGrid& sg,
                     ModeState& out);

/// Overwrites the incoming velocity half at each wall row with the diffuse
/// reflection of the outgoing half of the same row (discrete half-flux
/// normalization).
void apply_Pgamma(ModeState& state, const VelocityGrid& vg, const MaxwellianWeights& mw);

/// Discrete projections used throughout the spectral program.
struct Projections {
  // velocity-space: w-orthonormal basis of span{1, v1, v2, v3, |v|^2} sqrt(mu)
  std::vector<double> pbasis;  // 5 x Nv row-major
  std::size_t Nv = 0;
  // x3 trig basis values (P_n): [1/sqrt(2), cos(m pi x), sin(m pi x)] m=1..n_max
  std::vector<double> trig;  // (2*n_max+1) x Nx
  int n_max = 0;
  int Nx = 0;
  std::vector<double> wq;
  std::vector<double> wv;
  double mass_nrm = 0.0;          // <sqmu, sqmu> over x,v
  std::vector<double> sqmu;

  static Projections make(const VelocityGrid& vg, const MaxwellianWeights& mw,
                          const SlabGrid& sg, int n_max);

  void apply_P(ModeState& s) const;    // kernel projection, per x3 row
  void apply_P0(ModeState& s) const;   // average-mass projection
  void apply_Pn(ModeState& s, int n) const;  // x3 Fourier truncation
  std::complex<double> mass(const ModeState& s) const;  // <f, sqmu>_{x,v}
};

/// L_n f = L P_n f + nu (I - P_n) f, with L either the raw or symmetrized
/// collision operator. n < 0 means full L (no truncation).
void apply_Ln(const ModeState& in, const CollisionOperator& op, const Projections& pr,
              int n, bool use_sym, ModeState& out);

struct FiniteRankReport {
  int n;
  int rank;                       // numerical x3-rank of K_n outputs
  std::vector<double> singvals;   // x3 factor singular values
};
FiniteRankReport finite_rank_check(const CollisionOperator& op, const Projections& pr,
                                   const SlabGrid& sg, int n, std::uint64_t seed);

/// Flat binary state dump (row-major x3 x velocity, little-endian complex
/// doubles) with a JSON sidecar describing the grids.
bool save_state(const ModeState& s, const std::string& path, const std::string& sidecar_json);
bool load_state(ModeState& s, const std::string& path);

}  // namespace kinslab
