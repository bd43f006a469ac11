#pragma once

// Conformal-change formulas, the Yamabe functional and equation residual,
// the psi quotient, and the Z_phi family with its residual operators.

#include "yamabe/geometry.hpp"

namespace yamabe {

struct YamabeConstants {
  int n;
  double c_n;              // 4(n-1)/(n-2)
  double q;                // (n+2)/(n-2)
  double volume_exponent;  // (n-2)/n
};

inline YamabeConstants yamabe_constants(int n) {
  if (n < 3) throw std::invalid_argument("yamabe_constants: need n >= 3");
  return {n, 4.0 * (n - 1) / (n - 2), double(n + 2) / (n - 2), double(n - 2) / n};
}

// Positive power of a positive field via exp/log (stable at extreme values;
// exact at phi = 1).
ScalarField pow_field(const ScalarField& f, double e);

// Positive conformal factor phi; the conformal metric is phi^{4/(n-2)} g.
struct ConformalFactor {
  ScalarField phi;
  int n;

  ConformalFactor(ScalarField p, int dim);
  static ConformalFactor constant(const PeriodicGrid& g, double value = 1.0);

  ScalarField u() const { return pow_field(phi, 2.0 / (n - 2)); }          // u = phi^{2/(n-2)}
  ScalarField u_inverse() const { return pow_field(phi, -2.0 / (n - 2)); }
  static ConformalFactor from_u(const ScalarField& u, int dim);
};

MetricField conformal_metric(const MetricField& g, const ConformalFactor& phi);

// S(g) = v^{-(n-2)/n} * integral of s_g dV_g; scale-invariant.
double yamabe_functional(const MetricField& g);

// E(g, phi) = integral of (c_n |d phi|^2_g + s_g phi^2) dV_g, with the
// gradient term evaluated through the Dirichlet form of the self-adjoint
// Laplacian so that solver energy identities hold to rounding.
double yamabe_energy(const GeometryCache& geo, const ScalarField& s_g,
                     const ConformalFactor& phi);
double yamabe_energy(const MetricField& g, const ConformalFactor& phi);

// Yamabe equation residual -c_n lap_g phi + s_g phi - s_target phi^q.
ScalarField yamabe_residual(const GeometryCache& geo, const ScalarField& s_g,
                            const ConformalFactor& phi, double s_target);
ScalarField yamabe_residual(const MetricField& g, const ConformalFactor& phi,
                            double s_target);

// psi quotient: phi^q - phi = psi(phi) (phi - 1); psi(1) = 4/(n-2).
double psi(double phi, int n);

// Trace-free Ricci of phi^{4/(n-2)} g by the conformal-change formula
// z~ = z + (n-2) u D0^2 u^{-1}, all operators in the metric g.
SymTensorField z_conformal(const MetricField& g, const ConformalFactor& phi);

// Z_phi = u^{n-2} (z_gamma + (n-2) u D0^2 u^{-1}); Z_1 = z_gamma bitwise.
SymTensorField Z_phi(const MetricField& gamma, const ConformalFactor& phi);

// Residual of the uniqueness equation Z_phi = z.
SymTensorField uniqueness_residual(const MetricField& gamma, const ConformalFactor& phi);

// Residual of the local-maximum equation u^{-1}(1+u^{n-2}) z = -(n-2) D0^2 u^{-1}.
SymTensorField maxpoint_residual(const MetricField& gamma, const ConformalFactor& phi);

// Pointwise gamma-norm of z - phi^2 z~ (the rigidity relation z = phi^2 z~).
ScalarField consistency_232(const MetricField& gamma, const ConformalFactor& phi);

}  // namespace yamabe
