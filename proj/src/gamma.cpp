#include "kinslab/gamma.hpp"

#include <cmath>
#include <stdexcept>

#include "kinslab/parallel.hpp"

namespace kinslab {

GammaEvaluator::GammaEvaluator(const VelocityGrid& grid, int sphere_theta, int sphere_phi,
                               int threads)
    : grid_(&grid), threads_(threads) {
  if (grid.rule != VelocityRule::uniform_truncated)
    throw std::invalid_argument("Gamma evaluator requires the uniform_truncated grid");
  sphere_ = sphere_rule(sphere_theta, sphere_phi);
  std::size_t N = grid.size();
  sqmu_w_.resize(N);
  for (std::size_t j = 0; j < N; ++j) sqmu_w_[j] = sqrt_mu_of(grid.nodes[j]) * grid.w[j];
  n_ = grid.n_per_axis;
  h_ = grid.axis[1] - grid.axis[0];
  lo_ = grid.axis[0];
  loss_.resize(N * N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      const auto &a = grid.nodes[i], &b = grid.nodes[j];
      double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
      loss_[i * N + j] = 2.0 * M_PI * std::sqrt(dx * dx + dy * dy + dz * dz) * sqmu_w_[j];
    }
}

template <typename T>
T GammaEvaluator::interp(std::span<const T> f, const std::array<double, 3>& p) const {
  double tx = (p[0] - lo_) / h_, ty = (p[1] - lo_) / h_, tz = (p[2] - lo_) / h_;
  int ix = static_cast<int>(std::floor(tx)), iy = static_cast<int>(std::floor(ty)),
      iz = static_cast<int>(std::floor(tz));
  if (ix < 0 || iy < 0 || iz < 0 || ix >= n_ - 1 || iy >= n_ - 1 || iz >= n_ - 1)
    return T{};  // zero outside the cutoff
  double ax = tx - ix, ay = ty - iy, az = tz - iz;
  auto at = [&](int a, int b, int c) -> const T& {
    return f[(static_cast<std::size_t>(a) * n_ + b) * n_ + c];
  };
  T c00 = at(ix, iy, iz) * (1 - az) + at(ix, iy, iz + 1) * az;
  T c01 = at(ix, iy + 1, iz) * (1 - az) + at(ix, iy + 1, iz + 1) * az;
  T c10 = at(ix + 1, iy, iz) * (1 - az) + at(ix + 1, iy, iz + 1) * az;
  T c11 = at(ix + 1, iy + 1, iz) * (1 - az) + at(ix + 1, iy + 1, iz + 1) * az;
  T c0 = c00 * (1 - ay) + c01 * ay;
  T c1 = c10 * (1 - ay) + c11 * ay;
  return c0 * (1 - ax) + c1 * ax;
}

namespace {
template <typename T>
void evaluate_impl(const GammaEvaluator* self, const VelocityGrid& g,
                   const SphereRule& sph, const std::vector<double>& sqmu_w,
                   const std::vector<double>& loss, int threads, std::span<const T> f,
                   std::span<const T> gfield, std::span<T> out,
                   T (GammaEvaluator::*ip)(std::span<const T>, const std::array<double, 3>&)
                       const) {
  std::size_t N = g.size();
  parallel_for(N, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& v = g.nodes[i];
      T gain{};
      for (std::size_t j = 0; j < N; ++j) {
        const auto& u = g.nodes[j];
        double base = sqmu_w[j];
        double cx = u[0] - v[0], cy = u[1] - v[1], cz = u[2] - v[2];
        if (cx == 0 && cy == 0 && cz == 0) continue;
        T acc{};
        for (std::size_t s = 0; s < sph.dirs.size(); ++s) {
          const auto& w = sph.dirs[s];
          double d = cx * w[0] + cy * w[1] + cz * w[2];
          if (d == 0) continue;
          std::array<double, 3> vp{v[0] + d * w[0], v[1] + d * w[1], v[2] + d * w[2]};
          std::array<double, 3> up{u[0] - d * w[0], u[1] - d * w[1], u[2] - d * w[2]};
          T fu = (self->*ip)(f, up);
          if (fu == T{}) continue;
          T gv = (self->*ip)(gfield, vp);
          acc += std::abs(d) * sph.w[s] * fu * gv;
        }
        gain += base * acc;
      }
      // loss: g(v) * sum_j 2pi|v-u| sqmu_j w_j f(u_j)
      T lsum{};
      const double* lrow = loss.data() + i * N;
      for (std::size_t j = 0; j < N; ++j) lsum += lrow[j] * f[j];
      out[i] = gain - lsum * gfield[i];
    }
  });
}
}  // namespace

void GammaEvaluator::evaluate(std::span<const std::complex<double>> f,
                              std::span<const std::complex<double>> g,
                              std::span<std::complex<double>> out) const {
  if (f.size() != grid_->size() || g.size() != grid_->size())
    throw std::invalid_argument("Gamma: grid mismatch");
  evaluate_impl<std::complex<double>>(this, *grid_, sphere_, sqmu_w_, loss_, threads_, f, g,
                                      out, &GammaEvaluator::interp<std::complex<double>>);
}

void GammaEvaluator::evaluate_real(std::span<const double> f, std::span<const double> g,
                                   std::span<double> out) const {
  if (f.size() != grid_->size() || g.size() != grid_->size())
    throw std::invalid_argument("Gamma: grid mismatch");
  evaluate_impl<double>(this, *grid_, sphere_, sqmu_w_, loss_, threads_, f, g, out,
                        &GammaEvaluator::interp<double>);
}

std::vector<double> GammaEvaluator::conservation_defect(std::span<const double> f) const {
  std::size_t N = grid_->size();
  std::vector<double> out(N);
  evaluate_real(f, f, out);
  std::vector<double> defects;
  for (int chi = 0; chi < 5; ++chi) {
    double s = 0;
    for (std::size_t j = 0; j < N; ++j) {
      const auto& v = grid_->nodes[j];
      double c = 1.0;
      if (chi >= 1 && chi <= 3) c = v[chi - 1];
      if (chi == 4) c = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
      s += grid_->w[j] * out[j] * c * sqrt_mu_of(v);
    }
    defects.push_back(std::abs(s));
  }
  return defects;
}

}  // namespace kinslab
