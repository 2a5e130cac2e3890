#include "kinslab/decay_check.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kinslab/quadrature.hpp"

namespace kinslab {

DecayConvolutionReport check_decay_convolutions(double q, int n_t) {
  if (!(q >= 1.0 && q <= 2.0)) throw std::invalid_argument("q must lie in [1,2]");
  DecayConvolutionReport rep;
  rep.q = q;
  double s0 = 2.0 * (1.0 / q - 0.5);        // 2 sigma_{q,0}
  double s1 = 2.0 * (1.0 / q - 0.5 + 0.5);  // 2 sigma_{q,1}
  auto I = [&](double t, double expo) {
    // split at t/2; integrands smooth on each half
    auto f = [&](double s) {
      return std::pow(1.0 + t - s, -1.0) * std::pow(1.0 + s, -expo);
    };
    return adaptive_quad(f, 0.0, 0.5 * t, 1e-11) + adaptive_quad(f, 0.5 * t, t, 1e-11);
  };
  double c1 = 0, c2p = 0, c2l = 0;
  double run_lo = 1e300, run_hi = 0;
  double i2_100 = 0, i2_104 = 0;
  for (int i = 0; i < n_t; ++i) {
    double t = std::pow(10.0, 0.0 + 4.0 * i / (n_t - 1.0));
    double I1 = I(t, s0), I2 = I(t, s1);
    rep.t.push_back(t);
    rep.I1.push_back(I1);
    rep.I2.push_back(I2);
    if (t >= 10.0) {
      double v1 = I1 * std::pow(1.0 + t, s0) / std::log(2.0 + t);
      c1 = std::max(c1, v1);
      c2p = std::max(c2p, I2 * (1.0 + t));
      c2l = std::max(c2l, I2 * (1.0 + t) / std::log(2.0 + t));
      if (t >= 100.0) {
        run_lo = std::min(run_lo, v1);
        run_hi = std::max(run_hi, v1);
      }
    }
    if (std::abs(t - 100.0) < 5.0 && i2_100 == 0) i2_100 = I2 * (1.0 + t);
    if (i == n_t - 1) i2_104 = I2 * (1.0 + t);
  }
  rep.C1_log = c1;
  rep.C2_plain = c2p;
  rep.C2_log = c2l;
  rep.C1_stability = run_hi / run_lo;
  rep.I2_growth = i2_104 / i2_100;
  return rep;
}

std::string DecayConvolutionReport::to_json() const {
  std::ostringstream os;
  os.precision(10);
  os << "{\"q\":" << q << ",\"C1_log\":" << C1_log << ",\"C2_plain\":" << C2_plain
     << ",\"C2_log\":" << C2_log << ",\"C1_stability\":" << C1_stability
     << ",\"I2_growth\":" << I2_growth << "}";
  return os.str();
}

}  // namespace kinslab
