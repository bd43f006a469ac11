#include "yamabe/conformal.hpp"

#include <cmath>

namespace yamabe {

ScalarField pow_field(const ScalarField& f, double e) {
  ScalarField out(f.grid);
  for (std::int64_t p = 0; p < f.num_points(); ++p) {
    if (!(f(p) > 0.0)) throw std::invalid_argument("pow_field: non-positive value");
    out(p) = std::exp(e * std::log(f(p)));
  }
  return out;
}

ConformalFactor::ConformalFactor(ScalarField p, int dim) : phi(std::move(p)), n(dim) {
  if (n < 3) throw std::invalid_argument("ConformalFactor: need n >= 3");
  for (std::int64_t q = 0; q < phi.num_points(); ++q)
    if (!(phi(q) > 0.0))
      throw std::invalid_argument("ConformalFactor: non-positive conformal factor");
}

ConformalFactor ConformalFactor::constant(const PeriodicGrid& g, double value) {
  ScalarField f(g);
  for (auto& v : f.data) v = value;
  return ConformalFactor(std::move(f), g.dim);
}

ConformalFactor ConformalFactor::from_u(const ScalarField& u, int dim) {
  return ConformalFactor(pow_field(u, (dim - 2) / 2.0), dim);
}

MetricField conformal_metric(const MetricField& g, const ConformalFactor& phi) {
  detail::check_same_grid(g.grid, phi.phi.grid, "conformal_metric");
  ScalarField factor = pow_field(phi.phi, 4.0 / (phi.n - 2));
  MetricField out = g;
  for (std::int64_t p = 0; p < g.num_points(); ++p)
    for (int c = 0; c < g.ncomp; ++c) out(p, c) = factor(p) * g(p, c);
  return out;
}

double yamabe_functional(const MetricField& g) {
  GeometryCache geo(g);
  CurvatureResult cur = curvature(geo);
  const double v = volume(geo);
  const double total = integrate(geo, cur.s);
  return std::pow(v, -double(g.grid.dim - 2) / g.grid.dim) * total;
}

double yamabe_energy(const GeometryCache& geo, const ScalarField& s_g,
                     const ConformalFactor& phi) {
  const auto cn = yamabe_constants(phi.n).c_n;
  ScalarField sq(phi.phi.grid);
  for (std::int64_t p = 0; p < sq.num_points(); ++p)
    sq(p) = s_g(p) * phi.phi(p) * phi.phi(p);
  return cn * dirichlet_energy(geo, phi.phi) + integrate(geo, sq);
}

double yamabe_energy(const MetricField& g, const ConformalFactor& phi) {
  GeometryCache geo(g);
  return yamabe_energy(geo, curvature(geo).s, phi);
}

ScalarField yamabe_residual(const GeometryCache& geo, const ScalarField& s_g,
                            const ConformalFactor& phi, double s_target) {
  const auto k = yamabe_constants(phi.n);
  ScalarField lap = laplace_beltrami(geo, phi.phi);
  ScalarField phi_q = pow_field(phi.phi, k.q);
  ScalarField out(phi.phi.grid);
  for (std::int64_t p = 0; p < out.num_points(); ++p)
    out(p) = -k.c_n * lap(p) + s_g(p) * phi.phi(p) - s_target * phi_q(p);
  return out;
}

ScalarField yamabe_residual(const MetricField& g, const ConformalFactor& phi,
                            double s_target) {
  GeometryCache geo(g);
  return yamabe_residual(geo, curvature(geo).s, phi, s_target);
}

double psi(double phi, int n) {
  if (!(phi > 0.0)) throw std::invalid_argument("psi: non-positive phi");
  if (n < 3) throw std::invalid_argument("psi: need n >= 3");
  const double num = phi * (1.0 + phi * (1.0 + phi * (1.0 + phi)));  // phi^4+..+phi
  const double y = std::pow(phi, 4.0 / (n - 2));                     // phi^{q-1}
  double den = 0.0, yj = 1.0;
  for (int j = 0; j <= n - 3; ++j) { den += yj; yj *= y; }
  return num / den;
}

namespace {

// Shared assembly for the Z-type tensors: returns u, u^{n-2} and the
// g-trace-free Hessian of u^{-1}.
struct ZParts {
  ScalarField u;
  ScalarField u_pow;  // u^{n-2}
  SymTensorField hess0_uinv;
};

ZParts z_parts(const GeometryCache& geo, const ConformalFactor& phi) {
  ZParts parts{phi.u(), pow_field(phi.phi, 2.0), SymTensorField{}};
  // u^{n-2} = phi^2 exactly
  parts.hess0_uinv = differential(geo, phi.u_inverse()).hess0;
  return parts;
}

}  // namespace

SymTensorField z_conformal(const MetricField& g, const ConformalFactor& phi) {
  detail::check_same_grid(g.grid, phi.phi.grid, "z_conformal");
  GeometryCache geo(g);
  CurvatureResult cur = curvature(geo);
  ZParts parts = z_parts(geo, phi);
  const int n = g.grid.dim;
  SymTensorField out(g.grid);
  for (std::int64_t p = 0; p < out.num_points(); ++p)
    for (int c = 0; c < out.ncomp; ++c)
      out(p, c) = cur.z(p, c) + (n - 2) * parts.u(p) * parts.hess0_uinv(p, c);
  return out;
}

SymTensorField Z_phi(const MetricField& gamma, const ConformalFactor& phi) {
  detail::check_same_grid(gamma.grid, phi.phi.grid, "Z_phi");
  GeometryCache geo(gamma);
  CurvatureResult cur = curvature(geo);
  ZParts parts = z_parts(geo, phi);
  const int n = gamma.grid.dim;
  SymTensorField out(gamma.grid);
  for (std::int64_t p = 0; p < out.num_points(); ++p)
    for (int c = 0; c < out.ncomp; ++c)
      out(p, c) = parts.u_pow(p) *
                  (cur.z(p, c) + (n - 2) * parts.u(p) * parts.hess0_uinv(p, c));
  return out;
}

SymTensorField uniqueness_residual(const MetricField& gamma, const ConformalFactor& phi) {
  GeometryCache geo(gamma);
  CurvatureResult cur = curvature(geo);
  ZParts parts = z_parts(geo, phi);
  const int n = gamma.grid.dim;
  SymTensorField out(gamma.grid);
  for (std::int64_t p = 0; p < out.num_points(); ++p)
    for (int c = 0; c < out.ncomp; ++c) {
      const double zc = cur.z(p, c);
      out(p, c) =
          parts.u_pow(p) * (zc + (n - 2) * parts.u(p) * parts.hess0_uinv(p, c)) - zc;
    }
  return out;
}

SymTensorField maxpoint_residual(const MetricField& gamma, const ConformalFactor& phi) {
  GeometryCache geo(gamma);
  CurvatureResult cur = curvature(geo);
  ZParts parts = z_parts(geo, phi);
  const int n = gamma.grid.dim;
  SymTensorField out(gamma.grid);
  for (std::int64_t p = 0; p < out.num_points(); ++p) {
    const double uinv = 1.0 / parts.u(p);
    for (int c = 0; c < out.ncomp; ++c)
      out(p, c) = uinv * (1.0 + parts.u_pow(p)) * cur.z(p, c) +
                  (n - 2) * parts.hess0_uinv(p, c);
  }
  return out;
}

ScalarField consistency_232(const MetricField& gamma, const ConformalFactor& phi) {
  GeometryCache geo(gamma);
  CurvatureResult cur = curvature(geo);
  ZParts parts = z_parts(geo, phi);
  const int n = gamma.grid.dim;
  SymTensorField diff(gamma.grid);
  for (std::int64_t p = 0; p < diff.num_points(); ++p) {
    const double phi2 = phi.phi(p) * phi.phi(p);
    for (int c = 0; c < diff.ncomp; ++c) {
      const double ztilde =
          cur.z(p, c) + (n - 2) * parts.u(p) * parts.hess0_uinv(p, c);
      diff(p, c) = cur.z(p, c) - phi2 * ztilde;
    }
  }
  ScalarField norm2 = tensor_inner(geo, diff, diff);
  ScalarField out(gamma.grid);
  for (std::int64_t p = 0; p < out.num_points(); ++p)
    out(p) = std::sqrt(std::max(0.0, norm2(p)));
  return out;
}

}  // namespace yamabe
