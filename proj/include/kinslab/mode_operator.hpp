#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "kinslab/collision.hpp"
#include "kinslab/slab.hpp"

namespace kinslab {

using cplx = std::complex<double>;

enum class WallBc { diffuse, zero_inflow };

/// Discrete B_n(k) f = -i k v1 f - v3 d/dx3 f - L_n f with the wall condition
/// enforced by slaving the incoming half of the wall rows. All solver-facing
/// work happens on the reduced vector of free slots.
class ModeOperator {
 public:
  ModeOperator(const CollisionOperator& op, const MaxwellianWeights& mw, SlabGrid slab,
               double k, int n_reg /* <0 = full K */, bool use_sym_L = true,
               WallBc bc = WallBc::diffuse);
  /// general horizontal frequency (k1, k2): symbol -i (k1 v1 + k2 v2)
  ModeOperator(const CollisionOperator& op, const MaxwellianWeights& mw, SlabGrid slab,
               double k1, double k2, int n_reg, bool use_sym_L = true,
               WallBc bc = WallBc::diffuse);

  const CollisionOperator& collision() const { return *op_; }
  const VelocityGrid& vgrid() const { return op_->grid; }
  const SlabGrid& slab() const { return slab_; }
  const Projections& projections() const { return pr_; }
  const MaxwellianWeights& maxwellian_weights() const { return mw_; }
  double k() const { return k_; }
  const std::vector<double>& symbol() const { return symb_; }
  int n_reg() const { return n_reg_; }
  WallBc bc() const { return bc_; }

  std::size_t full_size() const { return static_cast<std::size_t>(slab_.Nx) * Nv_; }
  std::size_t reduced_size() const { return nred_; }

  /// Scatter a reduced vector into a full state (BC rows filled per the wall
  /// condition), and gather back.
  void embed(std::span<const cplx> xr, ModeState& full) const;
  void restrict_(const ModeState& full, std::span<cplx> xr) const;

  /// y = B_n(k) x on reduced vectors.
  void apply(std::span<const cplx> x, std::span<cplx> y) const;
  /// y = B* x (adjoint w.r.t. the weighted reduced inner product).
  void apply_adjoint(std::span<const cplx> x, std::span<cplx> y) const;

  /// weighted inner products
  cplx dot(std::span<const cplx> a, std::span<const cplx> b) const;
  double norm(std::span<const cplx> a) const;
  std::span<const double> weights() const { return wred_; }

  /// reduced-coordinate view of sqrt(mu) (constant in x3)
  const std::vector<cplx>& sqmu_reduced() const { return sqmu_red_; }

  /// discrete <f, sqmu>_{x,v} of a reduced vector (embedding first)
  cplx mass(std::span<const cplx> x) const;

  /// Dense real matrix of the doubled real form (2*nred x 2*nred, row-major);
  /// only for reduced problems below the dense threshold.
  std::vector<double> dense_real() const;

 private:
  const CollisionOperator* op_;
  MaxwellianWeights mw_;
  SlabGrid slab_;
  Projections pr_;
  double k_;
  int n_reg_;
  bool use_sym_;
  WallBc bc_;
  std::size_t Nv_ = 0, nred_ = 0;
  std::vector<std::size_t> slots_;   // free slot -> full index
  std::vector<double> wred_;         // weights of free slots
  std::vector<cplx> sqmu_red_;
  std::vector<double> symb_;         // k1 v1 + k2 v2 per velocity node
  const std::vector<double>* Ldense_ = nullptr;  // shared dense L (owned by the collision op)

  void apply_full(const ModeState& F, ModeState& out) const;
  void apply_full_adjoint(const ModeState& F, ModeState& out) const;
  void bc_fill(ModeState& F) const;
  void bc_fill_adjoint(ModeState& F) const;
};

}  // namespace kinslab
