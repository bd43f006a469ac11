#pragma once

// Extrapolation helpers shared by the refinement oracles and the one-sided
// derivative measurements.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace yamabe {

// Observed convergence order from errors at a refinement ratio (default 2):
// least-squares slope of log(err) against log(h). Errors must be positive.
inline double fit_order(const std::vector<double>& errors, double ratio = 2.0) {
  const int m = static_cast<int>(errors.size());
  if (m < 2) throw std::invalid_argument("fit_order: need >= 2 errors");
  // x_i = -i*log(ratio) (h halves each refinement), y_i = log(err_i)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    const double x = -i * std::log(ratio);
    const double y = std::log(errors[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct ExtrapolationResult {
  double value = 0.0;          // extrapolated limit at t -> 0
  double measured_order = 0.0; // observed leading order of the quotient error
};

// Polynomial (Neville) extrapolation of samples v(t_i) to t = 0, assuming an
// expansion v(t) = v0 + c1 t + c2 t^2 + ...  Matches the first-order remainder
// of the finite-t identities; higher orders are eliminated by the table.
inline ExtrapolationResult extrapolate_to_zero(const std::vector<double>& t,
                                               const std::vector<double>& v) {
  const int m = static_cast<int>(t.size());
  if (m < 2 || v.size() != t.size())
    throw std::invalid_argument("extrapolate_to_zero: need >= 2 matched samples");
  std::vector<double> tab = v;
  for (int level = 1; level < m; ++level)
    for (int i = 0; i < m - level; ++i)
      tab[i] = tab[i] + (0.0 - t[i]) * (tab[i + 1] - tab[i]) / (t[i + level] - t[i]);

  ExtrapolationResult out;
  out.value = tab[0];
  if (m >= 3) {
    const double d1 = std::fabs(v[0] - v[1]);
    const double d2 = std::fabs(v[1] - v[2]);
    if (d1 > 0 && d2 > 0 && t[0] != t[1] && t[1] != t[2])
      out.measured_order = std::log(d1 / d2) / std::log(t[0] / t[1]);
  } else {
    out.measured_order = 1.0;
  }
  return out;
}

}  // namespace yamabe
