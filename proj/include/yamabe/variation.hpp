#pragma once

// Volume-form-preserving metric curves g_t = gamma + t h, one-sided finite
// difference derivatives of the Yamabe constant with Richardson
// extrapolation, the first-variation formulas through -z and -Z_phi, the
// finite-t identity checks, and the local-maximum half-space test. Both the
// full grid representation and the circle-reduced warped representation are
// supported.

#include <string>
#include <vector>

#include "yamabe/product.hpp"
#include "yamabe/solver.hpp"

namespace yamabe {

// h - (tr_gamma h / n) gamma
SymTensorField trace_free_project(const MetricField& gamma, const SymTensorField& h_raw);

struct VariationCurve {
  MetricField gamma;  // unit-volume base point
  SymTensorField h;   // trace-free direction; the exact first-order term

  // gamma + t h rescaled pointwise by (det gamma / det(gamma + t h))^{1/n},
  // so the volume form is preserved exactly. Throws when gamma + t h stops
  // being positive definite, reporting the maximal safe t.
  MetricField at(double t) const;
  double max_safe_t(double t_hi = 1.0) const;
};

VariationCurve make_curve(const MetricField& gamma, const SymTensorField& h_raw);

struct DerivativeReport {
  std::string h_id;
  std::vector<double> t_samples;
  std::vector<double> s_values;   // Yamabe constant along the curve
  std::vector<double> quotients;  // (s_t - s_base)/t
  double s_base = 0.0;
  double fd_value = 0.0;          // Richardson-extrapolated one-sided derivative
  double extrapolation_order = 0.0;
  bool basin_jump = false;
  double formula_value_z = 0.0;   // filled by callers that evaluate formulas
  std::vector<double> formula_values_Zphi;
  double min_Zphi = 0.0;
};

// One-sided quotients of the class Yamabe constant along the curve, with
// warm-started basin tracking in t. Requires at least 3 positive t values.
DerivativeReport fd_derivative(const VariationCurve& curve, const SolverConfig& cfg,
                               std::vector<double> t_list);

// integral of <-z, h> dV_gamma (the unique-minimizer derivative formula)
double formula_derivative(const MetricField& gamma, const SymTensorField& h);
// integral of <-Z_phi, h> dV_gamma for each supplied factor
std::vector<double> formula_derivative_Zphi(const MetricField& gamma,
                                            const SymTensorField& h,
                                            const std::vector<ConformalFactor>& phis);

struct IdentityRow {
  double t = 0.0;
  double s_t = 0.0;
  double quotient = 0.0;
  double gap = 0.0;            // two-sides gap of the integrated identity, O(t)
  double vol_identity = 0.0;   // integral of (phi^{2n/(n-2)} - 1)/t, 0 to rounding
  double slack_min = 0.0;      // integral s_{g_t} dV - s_t, nonnegative
  double slack_energy = 0.0;   // E(gamma, phi_t) - s_gamma, nonnegative
};
struct IdentityReport {
  double s_base = 0.0;
  std::vector<IdentityRow> rows;
  double gap_order = 0.0;  // measured decay order of the gap in t
};
IdentityReport identity_checks(const VariationCurve& curve, const SolverConfig& cfg,
                               std::vector<double> t_list);

struct LocalMaxSample {
  std::string h_id;
  double formula_min = 0.0;  // min over phi of integral <-Z_phi, h>
  bool nonpositive = false;
};
struct LocalMaxReport {
  std::vector<LocalMaxSample> samples;
  bool local_max_consistent = false;        // all sampled s'(h) <= 0
  std::vector<double> maxpoint_residuals;   // L2 norm per phi
};
LocalMaxReport localmax_test(const MetricField& gamma,
                             const std::vector<ConformalFactor>& phis,
                             const std::vector<SymTensorField>& h_samples,
                             double tol = 1e-10);

// ---- circle-reduced (warped) variants -----------------------------------

WarpedTensor trace_free_project(const WarpedMetric& gamma, const WarpedTensor& h_raw);

struct ProductCurve {
  WarpedMetric gamma;
  WarpedTensor h;

  WarpedMetric at(double t) const;  // pointwise det-normalized
};
ProductCurve make_product_curve(const WarpedMetric& gamma, const WarpedTensor& h_raw);

// Yamabe constant of the class of the warped metric: it is conformal to the
// product with circle length conformal_circle_length(), so the reduced
// enumeration gives the class minimum.
double product_class_constant(const WarpedMetric& g, int m_solver);

// Quotients of product_class_constant along the curve with extrapolation.
DerivativeReport product_fd_derivative(const ProductCurve& curve, int m_solver,
                                       std::vector<double> t_list);

// integral of <-Z_psi, h> dV_gamma for factors psi_c = T_c phi / phi sampling
// the translation orbit of the minimizer phi (orbit_count equispaced shifts).
std::vector<double> product_orbit_formula_values(const WarpedMetric& gamma,
                                                 const std::vector<double>& phi_star,
                                                 const WarpedTensor& h,
                                                 int orbit_count);

}  // namespace yamabe
