#pragma once

#include <string>
#include <vector>

namespace kinslab {

/// Numeric verification of the convolution envelopes
///   I1(t) = int_0^t (1+t-s)^{-1} (1+s)^{-2 sigma_{q,0}} ds
///   I2(t) = int_0^t (1+t-s)^{-1} (1+s)^{-2 sigma_{q,1}} ds
/// over t in [1, 1e4] against the stated bounds, with fitted constants.
struct DecayConvolutionReport {
  double q;
  std::vector<double> t;
  std::vector<double> I1, I2;
  // fitted sup constants over t >= 10
  double C1_log;        // sup I1 (1+t)^{2 sigma_{q,0}} / log(2+t)
  double C2_plain;      // sup I2 (1+t)
  double C2_log;        // sup I2 (1+t) / log(2+t)
  double C1_stability;  // max/min of the running constant over [100, 1e4]
  double I2_growth;     // value(1e4)/value(100) of I2 (1+t): ~1 for q<2, log-growth at q=2
  std::string to_json() const;
};

DecayConvolutionReport check_decay_convolutions(double q, int n_t = 36);

}  // namespace kinslab
