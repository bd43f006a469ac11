#pragma once

// The circle-times-round-sphere family S^1(L) x S^{n-1}(1): periodic ODE form
// of the constant-curvature equation for circle-dependent conformal factors,
// Newton solves, pseudo-arclength continuation in L with bifurcation
// detection and branch switching, and a warped-metric adapter that lifts the
// reduced solutions to tensor level (curvature, Hessians, Z tensors) so the
// variation module can pair them with metric perturbations.

#include <cstdint>
#include <string>
#include <vector>

#include "yamabe/conformal.hpp"

namespace yamabe {

struct ProductGeometry {
  int n = 3;     // total dimension
  double L = 5.0;  // circle length
  int m = 128;   // circle sample count

  void validate() const;
  double sphere_scalar() const { return double(n - 1) * (n - 2); }
  // volume of the unit round S^{n-1}
  double sphere_volume() const;
  double spacing() const { return L / m; }
  // linearization of the constant branch loses stability at these lengths
  double bifurcation_length(int k) const;
};

struct ProductSolution {
  ProductGeometry geometry;
  std::vector<double> phi;  // periodic samples, normalized mean(phi^{2n/(n-2)}) = 1
  double s_ode = 0.0;       // curvature constant for the unnormalized metric
  double s_const = 0.0;     // curvature constant of the unit-volume representative
  double energy = 0.0;      // total-curvature value; equals s_const
  double residual_linf = 0.0;
  bool is_constant = false;
  bool is_yamabe = false;   // set by enumerate_yamabe
  int phase = 0;            // grid shift applied by phase normalization
  bool converged = false;
  int iterations = 0;
};

struct SolutionBranch {
  std::vector<ProductSolution> samples;  // ordered in L
  std::string branch_type;               // "constant" or "bifurcated-k"
  std::vector<double> bifurcation_points;
  bool truncated = false;                // step collapse before reaching the end
  std::string diagnostic;
};

struct ContinuationOptions {
  double ode_tol = 1e-11;
  int max_newton = 30;
  double step_min_frac = 1e-4;  // of the first bifurcation length
  double step_max_frac = 0.1;
  int max_steps = 4000;
  double bisect_tol = 1e-6;     // in L, for locating singular crossings
};

// -c_n phi'' + (n-1)(n-2) phi - s phi^q, 4th-order differences in theta.
std::vector<double> ode_residual(const ProductGeometry& geom,
                                 const std::vector<double>& phi, double s);
// Same residual with an exact (DFT) second derivative; cross-check oracle.
std::vector<double> ode_residual_spectral(const ProductGeometry& geom,
                                          const std::vector<double>& phi, double s);

// Newton solve with the normalization mean(phi^{2n/(n-2)}) = 1 and a
// translation phase condition anchored at the initial guess.
ProductSolution solve_product(const ProductGeometry& geom,
                              const std::vector<double>& init, double s_init,
                              double tol = 1e-11, int max_newton = 40);

// Pseudo-arclength continuation of seed from its L to L_end; monitors the
// smallest eigenvalue of the symmetric ODE Jacobian and bisects each sign
// change to locate bifurcation points.
SolutionBranch continue_branch(const ProductGeometry& geom, double L_end,
                               const ProductSolution& seed,
                               const ContinuationOptions& opt = {});

// Branch switch at a detected bifurcation: perturbs along the critical
// eigenvector slightly past the singular point and continues to L_end.
SolutionBranch branch_switch(const ProductGeometry& geom, double L_bif,
                             double L_end, const ContinuationOptions& opt = {});

// All constant-curvature solutions found at this geometry (constant branch
// plus mode-k seeded solves), phase-normalized, sorted by energy; minimal
// entries are flagged Yamabe. May under-enumerate.
std::vector<ProductSolution> enumerate_yamabe(const ProductGeometry& geom,
                                              double tol = 1e-11);

// Cyclic translate of a solution (exact symmetry of the problem).
ProductSolution orbit_translate(const ProductSolution& sol, int shift);

// ---- warped tensor adapter --------------------------------------------

// Diagonal tensor T = t_theta dtheta^2 + t_sphere ghat on the product.
struct WarpedTensor {
  std::vector<double> theta, sphere;
};

// Metric A(theta) dtheta^2 + B(theta) ghat with A, B positive periodic
// samples; all curvature quantities in closed form via 1-d stencils.
struct WarpedMetric {
  int n = 3;
  double L = 5.0;
  std::vector<double> A, B;

  void validate() const;
  int m() const { return static_cast<int>(A.size()); }
  double spacing() const { return L / m(); }

  WarpedTensor ricci() const;
  std::vector<double> scalar_curvature() const;
  WarpedTensor trace_free_ricci() const;
  // covariant Hessian of a circle function, and its trace-free part
  WarpedTensor hessian(const std::vector<double>& f) const;
  std::vector<double> laplacian(const std::vector<double>& f) const;
  WarpedTensor trace_free_hessian(const std::vector<double>& f) const;

  double volume() const;
  // integral of a circle function against dV
  double integrate(const std::vector<double>& f) const;
  // pointwise full contraction <T, h>_g
  std::vector<double> inner(const WarpedTensor& T, const WarpedTensor& h) const;
  // length of the circle factor of the conformally equivalent exact product
  double conformal_circle_length() const;
  // v^{-(n-2)/n} * integral of s dV
  double yamabe_functional() const;
};

// Lift phi^{4/(n-2)} (dtheta^2 + ghat): A = B = phi^{4/(n-2)}.
WarpedMetric lift_product(const ProductGeometry& geom, const std::vector<double>& phi);

// Z tensor of the factor phi over the warped base metric:
// u^{n-2} (z + (n-2) u D0^2 u^{-1}), u = phi^{2/(n-2)}.
WarpedTensor Z_phi_warped(const WarpedMetric& gamma, const std::vector<double>& phi);

}  // namespace yamabe
