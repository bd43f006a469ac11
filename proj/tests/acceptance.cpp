// End-to-end acceptance gate. Each criterion prints one pass/fail line with
// the measured quantities; the exit code is the number of failed criteria.
// All tolerances are pinned here, next to the checks they gate.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <exception>
#include <vector>

#include "test_fields.hpp"
#include "yamabe/random_fields.hpp"
#include "yamabe/richardson.hpp"
#include "yamabe/variation.hpp"

using namespace yamabe;
using namespace yamabe::testing;

namespace {

int failures = 0;

void report(int num, bool pass, const char* fmt, ...) {
  if (!pass) ++failures;
  std::printf("criterion %2d: %s  ", num, pass ? "PASS" : "FAIL");
  va_list args;
  va_start(args, fmt);
  std::vprintf(fmt, args);
  va_end(args);
  std::printf("\n");
  std::fflush(stdout);
}

double rel_diff(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

MetricField yamabe_base(const MetricField& g, double newton_tol) {
  SolverConfig cfg;
  cfg.newton_tol = newton_tol;
  YamabeSolution sol = solve_csc(g, cfg);
  if (!sol.converged) throw std::runtime_error("acceptance: base solve failed");
  return normalize_volume(conformal_metric(g, sol.phi));
}

WarpedMetric unit_volume(WarpedMetric g) {
  const double c0 = std::pow(g.volume(), -2.0 / g.n);
  for (double& a : g.A) a *= c0;
  for (double& b : g.B) b *= c0;
  return g;
}

// 1. flat torus is scalar-flat at 32^3; conformally flat closed form
//    converges at 4th order over 16/32/64
void criterion_1() {
  const double flat_s = linf_norm(curvature(MetricField::flat(torus3(32))).s);
  std::vector<double> errs;
  for (int N : {16, 32, 64}) {
    PeriodicGrid gr = torus3(N);
    ScalarField s = curvature(conf_flat_metric(gr, 0.2)).s;
    ScalarField exact = conf_flat_scalar_exact(gr, 0.2);
    double e = 0.0;
    for (std::int64_t p = 0; p < gr.size(); ++p)
      e = std::max(e, std::fabs(s(p) - exact(p)));
    errs.push_back(e);
  }
  const double order = fit_order(errs);
  report(1, flat_s <= 1e-10 && order >= 3.5,
         "flat |s|_inf = %.3e (<= 1e-10), closed-form order = %.2f (>= 3.5)",
         flat_s, order);
}

// 2. discrete L and L* are adjoint to 1e-6 relative on 10 seeded pairs
void criterion_2() {
  PeriodicGrid gr = torus3(32);
  MetricField g = curved_metric(gr, 0.3);
  GeometryCache geo(g);
  CurvatureResult curv = curvature(geo);
  SplitMix64 root(5150);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    SplitMix64 rf = root.split(2 * k), rh = root.split(2 * k + 1);
    ScalarField f = random_bandlimited(gr, rf, 2, 1.0);
    SymTensorField h = random_bandlimited_sym(gr, rh, 2, 0.5);
    ScalarField fLh(gr);
    ScalarField Lh = lin_scalar(geo, curv.ric, h);
    for (std::int64_t p = 0; p < gr.size(); ++p) fLh(p) = f(p) * Lh(p);
    const double a = integrate(geo, fLh);
    SymTensorField Lsf = lin_scalar_adjoint(geo, curv.ric, f);
    const double b = integrate(geo, tensor_inner(geo, Lsf, h));
    worst = std::max(worst, rel_diff(a, b));
  }
  report(2, worst <= 1e-6, "worst adjointness relative error = %.3e (<= 1e-6)",
         worst);
}

// 3. psi quotient law over 1000 random (phi, n); psi(1) exact
void criterion_3() {
  SplitMix64 rng(31);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 3 + static_cast<int>(rng.next() % 6);
    const double phi = rng.uniform(0.2, 3.0);
    const double q = double(n + 2) / (n - 2);
    const double lhs = std::pow(phi, q) - phi;
    const double rhs = psi(phi, n) * (phi - 1.0);
    worst = std::max(worst, std::fabs(lhs - rhs) / std::max(1.0, std::fabs(lhs)));
  }
  bool exact_at_one = true;
  for (int n = 3; n <= 8; ++n)
    exact_at_one = exact_at_one && psi(1.0, n) == 4.0 / (n - 2);
  report(3, worst <= 1e-12 && exact_at_one,
         "psi law relative error = %.3e (<= 1e-12), psi(1) exact for n=3..8: %s",
         worst, exact_at_one ? "yes" : "no");
}

// 4. solver on the e^{2w} delta class, w = 0.2 sin x1: residual, volume,
//    multistart agreement, and the constancy diagnostic of the output metric
void criterion_4() {
  PeriodicGrid gr = torus3(16);
  MetricField g = conf_flat_metric(gr, 0.2);
  SolverConfig cfg;
  cfg.newton_tol = 1e-11;  // headroom under the 1e-10 gate
  cfg.multistart_count = 10;
  cfg.dedup_tol = 1e-6;
  std::vector<YamabeSolution> sols = multistart_enumerate(g, cfg);
  if (sols.empty()) {
    report(4, false, "no converged solutions");
    return;
  }
  const YamabeSolution& sol = sols.front();
  const bool starts_agree = sols.size() == 1 && sol.duplicates == cfg.multistart_count;

  // constancy diagnostic of the solution: the scalar curvature recovered
  // through the transformation law must be constant, so applying the
  // Laplacian of the solution metric to it must vanish. Evaluated on the
  // representative with unit-mean factor so the diagnostic is not distorted
  // by the arbitrary overall scale of the unit-volume normalization.
  GeometryCache geo(g);
  CurvatureResult curv = curvature(geo);
  const YamabeConstants k = yamabe_constants(3);
  double pm = 0.0;
  for (std::int64_t p = 0; p < gr.size(); ++p) pm += sol.phi.phi(p);
  pm /= double(gr.size());
  ScalarField phat(gr);
  for (std::int64_t p = 0; p < gr.size(); ++p) phat(p) = sol.phi.phi(p) / pm;
  ConformalFactor cf(std::move(phat), 3);
  const double s_hat = sol.s_const * std::pow(pm, k.q - 1.0);
  ScalarField res_hat = yamabe_residual(geo, curv.s, cf, s_hat);
  ScalarField s_law(gr);
  for (std::int64_t p = 0; p < gr.size(); ++p)
    s_law(p) = s_hat + res_hat(p) / std::pow(cf.phi(p), k.q);
  GeometryCache geo_sol(conformal_metric(g, cf));
  const double phi_diag = linf_norm(laplace_beltrami(geo_sol, s_law));

  report(4,
         sol.converged && sol.residual_linf <= 1e-10 &&
             std::fabs(sol.volume - 1.0) <= 1e-12 && starts_agree &&
             phi_diag <= 1e-9,
         "residual = %.3e (<= 1e-10), |vol-1| = %.3e (<= 1e-12), "
         "classes = %zu with %d duplicate starts, constancy diagnostic = %.3e (<= 1e-9)",
         sol.residual_linf, std::fabs(sol.volume - 1.0), sols.size(),
         sol.duplicates, phi_diag);
}

// 5. extrapolated one-sided derivative of the class constant matches the
//    first-variation formula through -z on a negative class, 5 seeded h,
//    plus linearity in h
void criterion_5() {
  PeriodicGrid gr = torus3(32);
  SolverConfig cfg;
  cfg.newton_tol = 1e-10;
  MetricField gamma = yamabe_base(curved_metric(gr, 0.3), cfg.newton_tol);
  const std::vector<double> ts = {4e-3, 2e-3, 1e-3};

  SplitMix64 root(2024);
  std::vector<SymTensorField> hs;
  std::vector<double> fds, formulas;
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    SplitMix64 child = root.split(k + 1);
    hs.push_back(random_bandlimited_sym(gr, child, 1, 0.2));
    VariationCurve curve = make_curve(gamma, hs.back());
    DerivativeReport rep = fd_derivative(curve, cfg, ts);
    const double formula = formula_derivative(gamma, curve.h);
    fds.push_back(rep.fd_value);
    formulas.push_back(formula);
    worst = std::max(worst, std::fabs(rep.fd_value - formula) /
                                std::max(std::fabs(rep.fd_value), 1e-8));
  }

  SymTensorField combo = hs[0];
  for (size_t i = 0; i < combo.data.size(); ++i) combo.data[i] += 0.5 * hs[1].data[i];
  DerivativeReport rc = fd_derivative(make_curve(gamma, combo), cfg, ts);
  const double expected = fds[0] + 0.5 * fds[1];
  const double lin_err = std::fabs(rc.fd_value - expected) /
                         std::max({std::fabs(rc.fd_value), std::fabs(expected), 1e-8});

  report(5, worst <= 1e-3 && lin_err <= 2e-3,
         "worst fd vs formula relative error = %.3e (<= 1e-3) over 5 seeded h, "
         "linearity defect = %.3e (<= 2e-3)",
         worst, lin_err);
}

// 6. first bifurcation of the n=3 product family at 2*pi; above it the
//    nonconstant branch is strictly below the constant one
void criterion_6() {
  ProductGeometry geom{3, 5.0, 128};
  ProductSolution seed =
      solve_product(geom, std::vector<double>(geom.m, 1.0), geom.sphere_scalar());
  SolutionBranch br = continue_branch(geom, 7.0, seed);
  const double L1 = br.bifurcation_points.empty() ? 0.0 : br.bifurcation_points.front();
  const double bif_err = std::fabs(L1 - 2.0 * M_PI);

  ProductGeometry above{3, 1.2 * 2.0 * M_PI, 128};
  std::vector<ProductSolution> sols = enumerate_yamabe(above);
  double margin = 0.0;
  bool found = false;
  for (const ProductSolution& c : sols) {
    if (!c.is_constant) continue;
    for (const ProductSolution& s : sols)
      if (!s.is_constant && s.converged) {
        margin = std::max(margin, c.energy - s.energy);
        found = true;
      }
  }
  report(6, seed.converged && bif_err <= 1e-3 && found && margin > 1e-3,
         "|L1 - 2pi| = %.3e (<= 1e-3), nonconstant below constant by %.3e (> 1e-3)",
         bif_err, margin);
}

// 7. one-sided derivative at a nonconstant product minimizer equals the
//    minimum of the formula over the translation orbit
void criterion_7() {
  ProductGeometry geom{3, 1.2 * 2.0 * M_PI, 128};
  std::vector<ProductSolution> sols = enumerate_yamabe(geom);
  if (sols.empty() || sols.front().is_constant) {
    report(7, false, "no nonconstant minimizer found");
    return;
  }
  const ProductSolution& best = sols.front();
  WarpedMetric gamma = unit_volume(lift_product(geom, best.phi));

  WarpedTensor h_raw;
  h_raw.theta.resize(geom.m);
  h_raw.sphere.resize(geom.m);
  for (int i = 0; i < geom.m; ++i) {
    const double th = 2.0 * M_PI * i / geom.m;
    h_raw.theta[i] = 0.5 + 0.3 * std::cos(th + 0.7);
    h_raw.sphere[i] = 0.2 * std::sin(2.0 * th);
  }
  ProductCurve curve = make_product_curve(gamma, h_raw);
  DerivativeReport rep = product_fd_derivative(curve, geom.m, {4e-3, 2e-3, 1e-3});
  std::vector<double> orbit =
      product_orbit_formula_values(gamma, best.phi, curve.h, geom.m);
  const double vmin = *std::min_element(orbit.begin(), orbit.end());
  const double rel = std::fabs(rep.fd_value - vmin) / std::max(std::fabs(vmin), 1e-8);
  report(7, orbit.size() >= 16 && rel <= 1e-2,
         "fd = %.6e vs orbit minimum = %.6e over %zu samples, relative error = "
         "%.3e (<= 1e-2)",
         rep.fd_value, vmin, orbit.size(), rel);
}

// 8. the uniqueness-equation residual of the nonconstant minimizer is
//    genuinely nonzero (beyond discretization), and vanishes exactly at phi=1
void criterion_8() {
  auto residual_norm = [](int m) {
    ProductGeometry geom{3, 1.2 * 2.0 * M_PI, m};
    std::vector<ProductSolution> sols = enumerate_yamabe(geom);
    if (sols.empty() || sols.front().is_constant)
      throw std::runtime_error("no nonconstant minimizer");
    WarpedMetric gamma = lift_product(geom, std::vector<double>(m, 1.0));
    WarpedTensor z = gamma.trace_free_ricci();
    WarpedTensor Z = Z_phi_warped(gamma, sols.front().phi);
    WarpedTensor res;
    res.theta.resize(m);
    res.sphere.resize(m);
    for (int i = 0; i < m; ++i) {
      res.theta[i] = Z.theta[i] - z.theta[i];
      res.sphere[i] = Z.sphere[i] - z.sphere[i];
    }
    return std::sqrt(gamma.integrate(gamma.inner(res, res)));
  };
  const double r1 = residual_norm(128);
  const double r2 = residual_norm(256);
  const double disc_estimate = std::fabs(r1 - r2);

  MetricField g = curved_metric(torus3(8), 0.3);
  SymTensorField rexact =
      uniqueness_residual(g, ConformalFactor::constant(g.grid));
  const double exact_zero = linf_norm(rexact);

  report(8, r2 > 10.0 * disc_estimate && exact_zero == 0.0,
         "|residual|_L2 = %.6e vs discretization estimate %.3e (ratio %.1f > 10), "
         "residual at phi = 1: %.1e (exact 0)",
         r2, disc_estimate, r2 / std::max(disc_estimate, 1e-300), exact_zero);
}

// 9. finite-t identities along a curve: volume identity at rounding level,
//    gap decay of first order, and the two minimum inequalities on 20
//    random factors
void criterion_9() {
  PeriodicGrid gr = torus3(16);
  SolverConfig cfg;
  cfg.newton_tol = 3e-11;
  MetricField gamma = yamabe_base(curved_metric(gr, 0.3), cfg.newton_tol);
  GeometryCache geo(gamma);
  CurvatureResult curv = curvature(geo);
  const YamabeConstants k = yamabe_constants(3);

  SplitMix64 root(77);
  SplitMix64 child = root.split(1);
  VariationCurve curve = make_curve(gamma, random_bandlimited_sym(gr, child, 1, 0.4));
  IdentityReport rep = identity_checks(curve, cfg, {1e-2, 1e-3, 1e-4});
  double worst_vol = 0.0;
  for (const IdentityRow& row : rep.rows)
    worst_vol = std::max(worst_vol, std::fabs(row.vol_identity));
  const bool order_ok = rep.gap_order >= 0.8 && rep.gap_order <= 1.2;

  // the inequalities on random unit-conformal-volume factors: total curvature
  // of the conformal metric and the quadratic energy both sit above the
  // class constant
  const double kf = 2.0 * k.n / (k.n - 2);
  double worst_slack = 0.0;
  SplitMix64 fac_root = root.split(2);
  for (int j = 0; j < 20; ++j) {
    SplitMix64 rj = fac_root.split(j);
    ScalarField f = random_bandlimited(gr, rj, 2, 0.2);
    ScalarField phi(gr);
    for (std::int64_t p = 0; p < gr.size(); ++p) phi(p) = 1.0 + f(p);
    const double cvol = integrate(geo, pow_field(phi, kf));
    const double lam = std::pow(cvol, -1.0 / kf);
    for (std::int64_t p = 0; p < gr.size(); ++p) phi(p) *= lam;
    ConformalFactor cf(phi, 3);

    const double slack_energy = yamabe_energy(geo, curv.s, cf) - rep.s_base;
    MetricField gt = conformal_metric(gamma, cf);
    GeometryCache geot(gt);
    const double slack_total = integrate(geot, curvature(geot).s) - rep.s_base;
    worst_slack = std::min({worst_slack, slack_energy, slack_total});
  }

  report(9, worst_vol <= 1e-12 && order_ok && worst_slack >= -1e-8,
         "worst volume identity = %.3e (<= 1e-12), gap order = %.3f (1.0 +- 0.2), "
         "worst inequality slack = %.3e (>= -1e-8)",
         worst_vol, rep.gap_order, worst_slack);
}

// 10. the n=3 conformal invariant is conformally invariant at 4th order
void criterion_10() {
  std::vector<double> errs;
  for (int N : {16, 32, 64}) {
    PeriodicGrid gr = torus3(N);
    SplitMix64 root(123);
    SplitMix64 rg = root.split(1), rp = root.split(2);
    MetricField g = MetricField::flat(gr);
    SymTensorField pert = random_bandlimited_sym(gr, rg, 1, 0.15);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += pert.data[i];
    ScalarField f = random_bandlimited(gr, rp, 1, 0.2);
    ScalarField phi(gr);
    for (std::int64_t p = 0; p < gr.size(); ++p) phi(p) = 1.0 + f(p);
    ConformalFactor cf(phi, 3);

    ThreeTensorField w1 = cotton3(g);
    ThreeTensorField w2 = cotton3(conformal_metric(g, cf));
    ThreeTensorField diff(gr);
    for (size_t i = 0; i < w1.data.size(); ++i) diff.data[i] = w1.data[i] - w2.data[i];
    errs.push_back(l2_norm_flat(diff));
  }
  const double order = fit_order(errs);
  report(10, order >= 3.5, "conformal invariance order = %.2f (>= 3.5)", order);
}

}  // namespace

int main() {
  struct Entry {
    int num;
    void (*fn)();
  };
  const Entry entries[] = {{1, criterion_1}, {2, criterion_2}, {3, criterion_3},
                           {4, criterion_4}, {5, criterion_5}, {6, criterion_6},
                           {7, criterion_7}, {8, criterion_8}, {9, criterion_9},
                           {10, criterion_10}};
  for (const Entry& e : entries) {
    try {
      e.fn();
    } catch (const std::exception& ex) {
      report(e.num, false, "exception: %s", ex.what());
    }
  }
  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures;
}
