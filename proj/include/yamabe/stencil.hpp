#pragma once

// 4th-order periodic finite-difference stencils, applied line by line along a
// grid axis. Three flavours are needed:
//   d1       : central first derivative (1/12)(f[-2] - 8f[-1] + 8f[1] - f[2])/h
//   d2       : compact central second derivative
//   div_form : self-adjoint variable-coefficient operator ~ d/dx(a df/dx),
//              built as a Richardson combination (4*C2[h] - C2[2h])/3 of the
//              compact three-point conservative form. Each C2 is exactly
//              symmetric, so the combination is symmetric and 4th-order
//              accurate, and it has no spurious null mode at the Nyquist
//              frequency (unlike d1 applied twice).

#include <vector>

#include "yamabe/grid.hpp"

namespace yamabe {

namespace detail {

template <typename LineOp>
void for_each_line(const PeriodicGrid& g, int axis, LineOp&& op) {
  const std::int64_t inner = g.stride(axis);
  const std::int64_t m = g.points[axis];
  const std::int64_t outer = g.size() / (m * inner);
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t i = 0; i < inner; ++i)
      op(o * m * inner + i, inner, m);
}

}  // namespace detail

inline std::vector<double> d1(const PeriodicGrid& g, const std::vector<double>& f,
                              int axis) {
  std::vector<double> out(f.size());
  const double c = 1.0 / (12.0 * g.spacing(axis));
  detail::for_each_line(g, axis, [&](std::int64_t base, std::int64_t st, std::int64_t m) {
    for (std::int64_t t = 0; t < m; ++t) {
      const std::int64_t tm2 = (t + m - 2) % m, tm1 = (t + m - 1) % m;
      const std::int64_t tp1 = (t + 1) % m, tp2 = (t + 2) % m;
      out[base + t * st] = c * (f[base + tm2 * st] - 8.0 * f[base + tm1 * st] +
                                8.0 * f[base + tp1 * st] - f[base + tp2 * st]);
    }
  });
  return out;
}

inline std::vector<double> d2(const PeriodicGrid& g, const std::vector<double>& f,
                              int axis) {
  std::vector<double> out(f.size());
  const double h = g.spacing(axis);
  const double c = 1.0 / (12.0 * h * h);
  detail::for_each_line(g, axis, [&](std::int64_t base, std::int64_t st, std::int64_t m) {
    for (std::int64_t t = 0; t < m; ++t) {
      const std::int64_t tm2 = (t + m - 2) % m, tm1 = (t + m - 1) % m;
      const std::int64_t tp1 = (t + 1) % m, tp2 = (t + 2) % m;
      out[base + t * st] =
          c * (-f[base + tm2 * st] + 16.0 * f[base + tm1 * st] - 30.0 * f[base + t * st] +
               16.0 * f[base + tp1 * st] - f[base + tp2 * st]);
    }
  });
  return out;
}

// Conservative compact form with step s (in grid cells):
//   C2[s](a; f)(x) = [a_+ (f(x+s)-f(x)) - a_- (f(x)-f(x-s))] / (s h)^2,
// a_+- the midpoint averages of the coefficient.
inline void div_form_step(const PeriodicGrid& g, const std::vector<double>& a,
                          const std::vector<double>& f, int axis, int s,
                          double weight, std::vector<double>& out) {
  const double h = g.spacing(axis) * s;
  const double c = weight / (h * h);
  detail::for_each_line(g, axis, [&](std::int64_t base, std::int64_t st, std::int64_t m) {
    for (std::int64_t t = 0; t < m; ++t) {
      const std::int64_t tp = (t + s) % m, tm = (t + m - s) % m;
      const std::int64_t ic = base + t * st, ip = base + tp * st, im = base + tm * st;
      const double ap = 0.5 * (a[ic] + a[ip]);
      const double am = 0.5 * (a[ic] + a[im]);
      out[ic] += c * (ap * (f[ip] - f[ic]) - am * (f[ic] - f[im]));
    }
  });
}

// 4th-order self-adjoint d/dx_axis(a d/dx_axis f), accumulated into out.
inline void div_form(const PeriodicGrid& g, const std::vector<double>& a,
                     const std::vector<double>& f, int axis, std::vector<double>& out) {
  div_form_step(g, a, f, axis, 1, 4.0 / 3.0, out);
  div_form_step(g, a, f, axis, 2, -1.0 / 3.0, out);
}

// Diagonal of the symmetric matrix underlying div_form (used by the Jacobi
// preconditioner in the solver).
inline void div_form_diagonal(const PeriodicGrid& g, const std::vector<double>& a,
                              int axis, std::vector<double>& diag) {
  auto add_step = [&](int s, double weight) {
    const double h = g.spacing(axis) * s;
    const double c = weight / (h * h);
    detail::for_each_line(g, axis, [&](std::int64_t base, std::int64_t st, std::int64_t m) {
      for (std::int64_t t = 0; t < m; ++t) {
        const std::int64_t tp = (t + s) % m, tm = (t + m - s) % m;
        const std::int64_t ic = base + t * st;
        const double ap = 0.5 * (a[ic] + a[base + tp * st]);
        const double am = 0.5 * (a[ic] + a[base + tm * st]);
        diag[ic] -= c * (ap + am);
      }
    });
  };
  add_step(1, 4.0 / 3.0);
  add_step(2, -1.0 / 3.0);
}

}  // namespace yamabe
