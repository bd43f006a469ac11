#pragma once

// Compensated accumulation for the volume and energy quadratures. The unit
// volume constraint is differenced against 1 and then divided by curve
// parameters as small as 1e-4, so plain left-to-right summation noise
// (~N*eps) would dominate the quantities being checked. Neumaier's variant
// of Kahan summation keeps the error at the eps^2 level regardless of
// cancellation in the terms.

#include <cmath>

namespace yamabe {

struct NeumaierSum {
  double s = 0.0;
  double c = 0.0;

  void add(double x) {
    const double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }

  double value() const { return s + c; }
};

}  // namespace yamabe
