#include "yamabe/variation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "yamabe/geometry.hpp"
#include "yamabe/richardson.hpp"

namespace yamabe {

namespace {

// least-squares slope of log|y| against log t, skipping zero entries
double log_log_slope(const std::vector<double>& t, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (y[i] == 0.0) continue;
    const double x = std::log(t[i]);
    const double v = std::log(std::fabs(y[i]));
    sx += x; sy += v; sxx += x * x; sxy += x * v;
    ++m;
  }
  if (m < 2) return 0.0;
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

std::vector<double> sorted_positive(std::vector<double> t, int min_count,
                                    const char* who) {
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  if (static_cast<int>(t.size()) < min_count)
    throw std::invalid_argument(std::string(who) + ": need at least " +
                                std::to_string(min_count) + " distinct step sizes");
  for (double v : t)
    if (!(v > 0.0))
      throw std::invalid_argument(std::string(who) + ": step sizes must be positive");
  return t;
}

double phi_distance(const GeometryCache& geo, const ScalarField& a,
                    const ScalarField& b) {
  ScalarField d(a.grid);
  for (std::int64_t p = 0; p < a.num_points(); ++p) d(p) = a(p) - b(p);
  return l2_norm(geo, d);
}

// L2(gamma) distance beyond which consecutive curve solutions are treated as
// different basins rather than smooth drift in t.
constexpr double kBasinJumpDistance = 0.05;

}  // namespace

SymTensorField trace_free_project(const MetricField& gamma, const SymTensorField& h_raw) {
  detail::check_same_grid(gamma.grid, h_raw.grid, "trace_free_project");
  const PeriodicGrid& gr = gamma.grid;
  const int n = gr.dim;
  SymTensorField out = h_raw;
  SmallMat gm, ginv;
  for (std::int64_t p = 0; p < gr.size(); ++p) {
    gamma.fill_matrix(p, gm);
    invert(gm, n, ginv);
    double tr = 0.0, scale = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double term = at(ginv, n, i, j) * h_raw.comp(p, i, j);
        tr += term;
        scale += std::fabs(term);
      }
    // traces at rounding level are left alone so the projection is bitwise
    // idempotent
    if (std::fabs(tr) <= 1e-13 * scale) continue;
    const double f = tr / n;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) out.comp(p, i, j) -= f * gamma.comp(p, i, j);
  }
  return out;
}

MetricField VariationCurve::at(double t) const {
  const PeriodicGrid& gr = gamma.grid;
  const int n = gr.dim;
  MetricField out(gr);
  SmallMat gm, hm, inv;
  for (std::int64_t p = 0; p < gr.size(); ++p) {
    gamma.fill_matrix(p, gm);
    const double det_g = invert(gm, n, inv);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        yamabe::at(hm, n, i, j) = gamma.comp(p, i, j) + t * h.comp(p, i, j);
    if (min_eigenvalue_sym(hm, n) <= 0.0) {
      std::ostringstream os;
      os << "variation curve: gamma + t h is not positive definite at t = " << t
         << "; maximal safe t is " << max_safe_t(t);
      throw std::invalid_argument(os.str());
    }
    const double det_h = invert(hm, n, inv);
    const double scale = std::pow(det_g / det_h, 1.0 / n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j)
        out.comp(p, i, j) = scale * (gamma.comp(p, i, j) + t * h.comp(p, i, j));
  }
  return out;
}

double VariationCurve::max_safe_t(double t_hi) const {
  const PeriodicGrid& gr = gamma.grid;
  const int n = gr.dim;
  auto safe = [&](double t) {
    SmallMat m;
    for (std::int64_t p = 0; p < gr.size(); ++p) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          yamabe::at(m, n, i, j) = gamma.comp(p, i, j) + t * h.comp(p, i, j);
      if (min_eigenvalue_sym(m, n) <= 0.0) return false;
    }
    return true;
  };
  if (safe(t_hi)) return t_hi;
  double lo = 0.0, hi = t_hi;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (safe(mid) ? lo : hi) = mid;
  }
  return lo;
}

VariationCurve make_curve(const MetricField& gamma, const SymTensorField& h_raw) {
  const double vol = volume(gamma);
  if (std::fabs(vol - 1.0) > 1e-6)
    throw std::invalid_argument("make_curve: base metric must have unit volume");
  return {gamma, trace_free_project(gamma, h_raw)};
}

DerivativeReport fd_derivative(const VariationCurve& curve, const SolverConfig& cfg,
                               std::vector<double> t_list) {
  const std::vector<double> ts = sorted_positive(std::move(t_list), 3, "fd_derivative");
  GeometryCache geo(curve.gamma);

  DerivativeReport rep;
  YamabeSolution base = solve_csc(curve.gamma, cfg);
  if (!base.converged)
    throw std::runtime_error("fd_derivative: base solve did not converge");
  rep.s_base = base.s_const;

  ScalarField prev_phi = base.phi.phi;
  int same_basin_count = 0;
  for (double t : ts) {
    MetricField g_t = curve.at(t);
    YamabeSolution sol = solve_csc(g_t, cfg, ConformalFactor(prev_phi, geo.grid().dim));
    if (!sol.converged)
      throw std::runtime_error("fd_derivative: solve did not converge at t = " +
                               std::to_string(t));
    const double dist = phi_distance(geo, sol.phi.phi, prev_phi);
    if (dist > kBasinJumpDistance && !rep.basin_jump) rep.basin_jump = true;
    if (!rep.basin_jump) ++same_basin_count;
    rep.t_samples.push_back(t);
    rep.s_values.push_back(sol.s_const);
    rep.quotients.push_back((sol.s_const - rep.s_base) / t);
    prev_phi = sol.phi.phi;
  }

  // on a basin jump only the contiguous small-t prefix is used, and the
  // report is flagged so callers can split the curve
  const int m = rep.basin_jump ? std::max(2, same_basin_count)
                               : static_cast<int>(ts.size());
  std::vector<double> tt(rep.t_samples.begin(), rep.t_samples.begin() + m);
  std::vector<double> qq(rep.quotients.begin(), rep.quotients.begin() + m);
  ExtrapolationResult ex = extrapolate_to_zero(tt, qq);
  rep.fd_value = ex.value;
  rep.extrapolation_order = ex.measured_order;
  return rep;
}

double formula_derivative(const MetricField& gamma, const SymTensorField& h) {
  GeometryCache geo(gamma);
  CurvatureResult curv = curvature(geo);
  return -integrate(geo, tensor_inner(geo, curv.z, h));
}

std::vector<double> formula_derivative_Zphi(const MetricField& gamma,
                                            const SymTensorField& h,
                                            const std::vector<ConformalFactor>& phis) {
  GeometryCache geo(gamma);
  std::vector<double> out;
  out.reserve(phis.size());
  for (const ConformalFactor& phi : phis) {
    SymTensorField Z = Z_phi(gamma, phi);
    out.push_back(-integrate(geo, tensor_inner(geo, Z, h)));
  }
  return out;
}

IdentityReport identity_checks(const VariationCurve& curve, const SolverConfig& cfg,
                               std::vector<double> t_list) {
  const std::vector<double> ts =
      sorted_positive(std::move(t_list), 2, "identity_checks");
  GeometryCache geo(curve.gamma);
  CurvatureResult curv = curvature(geo);
  const YamabeConstants k = yamabe_constants(geo.grid().dim);
  const double kf = 2.0 * k.n / (k.n - 2);
  ScalarField Lh = lin_scalar(geo, curv.ric, curve.h);

  IdentityReport rep;
  YamabeSolution base = solve_csc(curve.gamma, cfg);
  if (!base.converged)
    throw std::runtime_error("identity_checks: base solve did not converge");
  rep.s_base = base.s_const;

  ScalarField prev_phi = base.phi.phi;
  for (double t : ts) {
    MetricField g_t = curve.at(t);
    GeometryCache geo_t(g_t);
    YamabeSolution sol = solve_csc(g_t, cfg, ConformalFactor(prev_phi, k.n));
    if (!sol.converged)
      throw std::runtime_error("identity_checks: solve did not converge at t = " +
                               std::to_string(t));
    prev_phi = sol.phi.phi;
    const ScalarField& phi = sol.phi.phi;

    IdentityRow row;
    row.t = t;
    row.s_t = sol.s_const;
    row.quotient = (sol.s_const - rep.s_base) / t;

    ScalarField lhs_int(geo.grid()), vol_int(geo.grid()), phi_q(geo.grid());
    for (std::int64_t p = 0; p < phi.num_points(); ++p) {
      lhs_int(p) = ((phi(p) - 1.0) / t) * psi(phi(p), k.n);
      vol_int(p) = (std::pow(phi(p), kf) - 1.0) / t;
      phi_q(p) = std::pow(phi(p), k.q);
    }
    const double lhs = -rep.s_base * integrate(geo_t, lhs_int);
    ScalarField phiLh(geo.grid());
    for (std::int64_t p = 0; p < phi.num_points(); ++p) phiLh(p) = phi(p) * Lh(p);
    const double rhs = row.quotient * integrate(geo_t, phi_q) - integrate(geo_t, phiLh);
    row.gap = lhs - rhs;

    row.vol_identity = integrate(geo_t, vol_int);

    CurvatureResult curv_t = curvature(geo_t);
    row.slack_min = integrate(geo_t, curv_t.s) - sol.s_const;

    ScalarField s_gamma = curv.s;
    row.slack_energy =
        yamabe_energy(geo, s_gamma, ConformalFactor(phi, k.n)) - rep.s_base;

    rep.rows.push_back(row);
  }

  std::vector<double> tv, gv;
  for (const IdentityRow& r : rep.rows) { tv.push_back(r.t); gv.push_back(r.gap); }
  rep.gap_order = log_log_slope(tv, gv);
  return rep;
}

LocalMaxReport localmax_test(const MetricField& gamma,
                             const std::vector<ConformalFactor>& phis,
                             const std::vector<SymTensorField>& h_samples,
                             double tol) {
  if (phis.empty())
    throw std::invalid_argument("localmax_test: need at least one factor");
  GeometryCache geo(gamma);
  LocalMaxReport rep;
  rep.local_max_consistent = true;

  std::vector<SymTensorField> Zs;
  Zs.reserve(phis.size());
  for (const ConformalFactor& phi : phis) {
    Zs.push_back(Z_phi(gamma, phi));
    rep.maxpoint_residuals.push_back(l2_norm(geo, maxpoint_residual(gamma, phi)));
  }

  int idx = 0;
  for (const SymTensorField& h_raw : h_samples) {
    SymTensorField h = trace_free_project(gamma, h_raw);
    LocalMaxSample sample;
    sample.h_id = "h" + std::to_string(idx++);
    double best = 0.0;
    bool first = true;
    for (const SymTensorField& Z : Zs) {
      const double v = -integrate(geo, tensor_inner(geo, Z, h));
      if (first || v < best) best = v;
      first = false;
    }
    sample.formula_min = best;
    sample.nonpositive = best <= tol;
    if (!sample.nonpositive) rep.local_max_consistent = false;
    rep.samples.push_back(sample);
  }
  return rep;
}

// ---- circle-reduced variants --------------------------------------------

WarpedTensor trace_free_project(const WarpedMetric& gamma, const WarpedTensor& h_raw) {
  const int m = gamma.m();
  const int n = gamma.n;
  WarpedTensor out;
  out.theta.resize(m);
  out.sphere.resize(m);
  for (int i = 0; i < m; ++i) {
    const double a = h_raw.theta[i] / gamma.A[i];
    const double b = (n - 1) * h_raw.sphere[i] / gamma.B[i];
    const double tr = a + b;
    out.theta[i] = h_raw.theta[i];
    out.sphere[i] = h_raw.sphere[i];
    if (std::fabs(tr) <= 1e-13 * (std::fabs(a) + std::fabs(b))) continue;
    out.theta[i] -= tr / n * gamma.A[i];
    out.sphere[i] -= tr / n * gamma.B[i];
  }
  return out;
}

WarpedMetric ProductCurve::at(double t) const {
  const int m = gamma.m();
  const int n = gamma.n;
  WarpedMetric out = gamma;
  for (int i = 0; i < m; ++i) {
    const double At = gamma.A[i] + t * h.theta[i];
    const double Bt = gamma.B[i] + t * h.sphere[i];
    if (!(At > 0.0) || !(Bt > 0.0)) {
      double safe = t;
      for (int j = 0; j < m; ++j) {
        if (h.theta[j] < 0.0) safe = std::min(safe, -gamma.A[j] / h.theta[j]);
        if (h.sphere[j] < 0.0) safe = std::min(safe, -gamma.B[j] / h.sphere[j]);
      }
      std::ostringstream os;
      os << "product curve: metric coefficients lose positivity at t = " << t
         << "; maximal safe t is " << safe;
      throw std::invalid_argument(os.str());
    }
    const double det_g = gamma.A[i] * std::pow(gamma.B[i], n - 1);
    const double det_t = At * std::pow(Bt, n - 1);
    const double scale = std::pow(det_g / det_t, 1.0 / n);
    out.A[i] = scale * At;
    out.B[i] = scale * Bt;
  }
  return out;
}

ProductCurve make_product_curve(const WarpedMetric& gamma, const WarpedTensor& h_raw) {
  gamma.validate();
  if (h_raw.theta.size() != gamma.A.size() || h_raw.sphere.size() != gamma.B.size())
    throw std::invalid_argument("make_product_curve: perturbation size mismatch");
  return {gamma, trace_free_project(gamma, h_raw)};
}

double product_class_constant(const WarpedMetric& g, int m_solver) {
  ProductGeometry geom;
  geom.n = g.n;
  geom.L = g.conformal_circle_length();
  geom.m = m_solver;
  std::vector<ProductSolution> sols = enumerate_yamabe(geom);
  if (sols.empty() || !sols.front().converged)
    throw std::runtime_error("product_class_constant: enumeration failed");
  return sols.front().energy;
}

DerivativeReport product_fd_derivative(const ProductCurve& curve, int m_solver,
                                       std::vector<double> t_list) {
  const std::vector<double> ts =
      sorted_positive(std::move(t_list), 3, "product_fd_derivative");
  DerivativeReport rep;
  rep.s_base = product_class_constant(curve.gamma, m_solver);
  for (double t : ts) {
    const double s_t = product_class_constant(curve.at(t), m_solver);
    rep.t_samples.push_back(t);
    rep.s_values.push_back(s_t);
    rep.quotients.push_back((s_t - rep.s_base) / t);
  }
  ExtrapolationResult ex = extrapolate_to_zero(rep.t_samples, rep.quotients);
  rep.fd_value = ex.value;
  rep.extrapolation_order = ex.measured_order;
  return rep;
}

std::vector<double> product_orbit_formula_values(const WarpedMetric& gamma,
                                                 const std::vector<double>& phi_star,
                                                 const WarpedTensor& h,
                                                 int orbit_count) {
  const int m = gamma.m();
  if (static_cast<int>(phi_star.size()) != m)
    throw std::invalid_argument("product_orbit_formula_values: phi size mismatch");
  if (orbit_count < 1)
    throw std::invalid_argument("product_orbit_formula_values: need >= 1 orbit sample");
  std::vector<double> out;
  out.reserve(orbit_count);
  std::vector<double> psi_c(m);
  for (int j = 0; j < orbit_count; ++j) {
    const int shift = static_cast<int>(std::llround(double(j) * m / orbit_count)) % m;
    for (int i = 0; i < m; ++i) psi_c[i] = phi_star[(i + shift) % m] / phi_star[i];
    WarpedTensor Z = Z_phi_warped(gamma, psi_c);
    std::vector<double> ip = gamma.inner(Z, h);
    out.push_back(-gamma.integrate(ip));
  }
  return out;
}

}  // namespace yamabe
