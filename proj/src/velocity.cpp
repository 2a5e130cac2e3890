#include "kinslab/velocity.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "kinslab/quadrature.hpp"

namespace kinslab {

std::string to_string(VelocityRule r) {
  return r == VelocityRule::gauss_hermite_tensor ? "gauss_hermite_tensor"
                                                 : "uniform_truncated";
}

VelocityRule velocity_rule_from_string(const std::string& s) {
  if (s == "gauss_hermite_tensor") return VelocityRule::gauss_hermite_tensor;
  if (s == "uniform_truncated") return VelocityRule::uniform_truncated;
  throw std::invalid_argument("unknown velocity rule: " + s);
}

double mu_of(const std::array<double, 3>& v) {
  double s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  return std::pow(2.0 * M_PI, -1.5) * std::exp(-0.5 * s);
}

double sqrt_mu_of(const std::array<double, 3>& v) {
  double s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  return std::pow(2.0 * M_PI, -0.75) * std::exp(-0.25 * s);
}

std::uint64_t VelocityGrid::hash() const {
  auto mix = [](std::uint64_t h, std::uint64_t x) {
    h ^= x;
    return h * 0x100000001b3ull;
  };
  std::uint64_t h = 0xcbf29ce484222325ull;
  h = mix(h, rule == VelocityRule::gauss_hermite_tensor ? 1 : 2);
  h = mix(h, static_cast<std::uint64_t>(n_per_axis));
  std::uint64_t c;
  static_assert(sizeof(double) == sizeof(std::uint64_t));
  std::memcpy(&c, &cutoff, 8);
  h = mix(h, c);
  h = mix(h, 3 /* assembly version */);
  return h;
}

std::string VelocityGrid::to_json(double theta) const {
  std::ostringstream os;
  os << "{\"rule\":\"" << to_string(rule) << "\",\"n_per_axis\":" << n_per_axis
     << ",\"cutoff\":" << cutoff << ",\"theta\":" << theta << "}";
  return os.str();
}

VelocityGrid build_velocity_grid(VelocityRule rule, int n_per_axis, double cutoff) {
  if (n_per_axis % 2 != 0 || n_per_axis < 4)
    throw std::invalid_argument(
        "n_per_axis must be even and >= 4 (odd counts place a grazing node at v3=0)");
  VelocityGrid g;
  g.rule = rule;
  g.n_per_axis = n_per_axis;
  g.cutoff = cutoff;
  int n = n_per_axis;
  if (rule == VelocityRule::gauss_hermite_tensor) {
    Rule1D gh = gauss_hermite(n);
    g.axis.resize(n);
    g.axis_w.resize(n);
    const double s2 = std::sqrt(2.0);
    for (int i = 0; i < n; ++i) {
      g.axis[i] = s2 * gh.x[i];
      g.axis_w[i] = gh.w[i] * std::exp(gh.x[i] * gh.x[i]) * s2;
    }
    // enforce exact symmetry of the computed rule
    for (int i = 0; i < n / 2; ++i) {
      double a = 0.5 * (g.axis[n - 1 - i] - g.axis[i]);
      g.axis[i] = -a;
      g.axis[n - 1 - i] = a;
      double ww = 0.5 * (g.axis_w[i] + g.axis_w[n - 1 - i]);
      g.axis_w[i] = g.axis_w[n - 1 - i] = ww;
    }
    // node-to-node cells plus one ghost margin cell per side
    g.margin = 1;
    g.n_cells = n + 1;
    g.cell_bnd.resize(g.n_cells + 1);
    double d_edge = g.axis[1] - g.axis[0];
    for (int i = 0; i < n; ++i) g.cell_bnd[i + 1] = g.axis[i];
    g.cell_bnd[0] = g.axis[0] - 2.0 * d_edge;
    g.cell_bnd[n + 1] = g.axis[n - 1] + 2.0 * d_edge;
  } else {
    if (!(cutoff > 0)) throw std::invalid_argument("cutoff must be positive");
    double h = 2.0 * cutoff / n;
    g.axis.resize(n);
    g.axis_w.assign(n, h);
    for (int i = 0; i < n; ++i) g.axis[i] = -cutoff + (i + 0.5) * h;
    g.margin = 0;
    g.n_cells = n - 1;  // node-to-node cells; outside the hull f = 0 by cutoff
    g.cell_bnd.resize(g.n_cells + 1);
    for (int i = 0; i < n; ++i) g.cell_bnd[i] = g.axis[i];
  }
  std::size_t N = static_cast<std::size_t>(n) * n * n;
  g.nodes.resize(N);
  g.w.resize(N);
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < n; ++iz) {
        int id = g.index(ix, iy, iz);
        g.nodes[id] = {g.axis[ix], g.axis[iy], g.axis[iz]};
        g.w[id] = g.axis_w[ix] * g.axis_w[iy] * g.axis_w[iz];
      }
  // certify quadrature tolerance on probe moments
  double worst = 1e-14;
  auto probe = [&](auto f, double exact) {
    double s = 0;
    for (std::size_t i = 0; i < N; ++i) s += g.w[i] * f(g.nodes[i]) * mu_of(g.nodes[i]);
    worst = std::max(worst, std::abs(s - exact) / std::abs(exact));
  };
  probe([](const std::array<double, 3>&) { return 1.0; }, 1.0);
  probe([](const std::array<double, 3>& v) { return v[0] * v[0]; }, 1.0);
  probe([](const std::array<double, 3>& v) {
    double s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    return s * s;
  }, 15.0);
  // kinked probe: int |v3| mu dv = sqrt(2/pi)
  probe([](const std::array<double, 3>& v) { return std::abs(v[2]); },
        std::sqrt(2.0 / M_PI));
  g.tol_q = worst;
  return g;
}

int q3_quad_of_cell(const VelocityGrid& g, int cell) {
  int n = g.n_per_axis;
  int c = cell - g.margin;  // node-cell index: spans nodes (c, c+1)
  if (c < 0) c = 0;
  if (c > n - 2) c = n - 2;
  return std::min(std::max(c - 1, 0), n - 4);
}

MaxwellianWeights maxwellian(const VelocityGrid& grid, double theta) {
  if (!(theta > 0.0 && theta < 0.25))
    throw std::invalid_argument("theta must lie strictly in (0, 1/4)");
  MaxwellianWeights m;
  m.theta = theta;
  m.c_mu = std::sqrt(2.0 * M_PI);
  std::size_t N = grid.size();
  m.mu.resize(N);
  m.sqrt_mu.resize(N);
  m.wexp.resize(N);
  double flux = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto& v = grid.nodes[i];
    m.mu[i] = mu_of(v);
    m.sqrt_mu[i] = sqrt_mu_of(v);
    double s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    m.wexp[i] = std::exp(theta * s);
    if (v[2] > 0) flux += grid.w[i] * m.mu[i] * v[2];
  }
  m.c_half = 1.0 / flux;
  return m;
}

std::complex<double> inner_product(std::span<const std::complex<double>> f,
                                   std::span<const std::complex<double>> g,
                                   const VelocityGrid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size())
    throw std::invalid_argument("inner_product: length mismatch");
  std::complex<double> s{0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) s += grid.w[i] * f[i] * std::conj(g[i]);
  return s;
}

double inner_product(std::span<const double> f, std::span<const double> g,
                     const VelocityGrid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size())
    throw std::invalid_argument("inner_product: length mismatch");
  double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += grid.w[i] * f[i] * g[i];
  return s;
}

}  // namespace kinslab
