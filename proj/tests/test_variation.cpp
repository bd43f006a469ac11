#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "test_fields.hpp"
#include "yamabe/random_fields.hpp"
#include "yamabe/variation.hpp"

using namespace yamabe;
using namespace yamabe::testing;

namespace {

// discrete Yamabe representative of the class of g, volume exactly 1
MetricField yamabe_base(const MetricField& g) {
  SolverConfig cfg;
  cfg.newton_tol = 3e-11;
  YamabeSolution sol = solve_csc(g, cfg);
  REQUIRE(sol.converged);
  return normalize_volume(conformal_metric(g, sol.phi));
}

SolverConfig curve_config() {
  SolverConfig cfg;
  cfg.newton_tol = 3e-11;
  return cfg;
}

WarpedMetric unit_volume(WarpedMetric g) {
  const double c0 = std::pow(g.volume(), -2.0 / g.n);
  for (double& a : g.A) a *= c0;
  for (double& b : g.B) b *= c0;
  return g;
}

}  // namespace

TEST_CASE("trace-free projection annihilates the trace and is idempotent") {
  PeriodicGrid gr = torus3(8);
  MetricField g = curved_metric(gr);
  SplitMix64 rng(7);
  SymTensorField h_raw = random_bandlimited_sym(gr, rng, 1, 0.5);

  SymTensorField h = trace_free_project(g, h_raw);
  GeometryCache geo(g);
  double max_tr = 0.0;
  for (std::int64_t p = 0; p < gr.size(); ++p) {
    double tr = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        tr += geo.inverse().comp(p, i, j) * h.comp(p, i, j);
    max_tr = std::max(max_tr, std::fabs(tr));
  }
  CHECK(max_tr <= 1e-10);

  SymTensorField h2 = trace_free_project(g, h);
  CHECK(h2.data == h.data);

  // a pure trace direction projects to zero
  SymTensorField zero = trace_free_project(g, g);
  CHECK(linf_norm(zero) <= 1e-12);
}

TEST_CASE("curve evaluation preserves the volume form exactly") {
  PeriodicGrid gr = torus3(8);
  MetricField g = normalize_volume(curved_metric(gr));
  SplitMix64 rng(11);
  VariationCurve curve = make_curve(g, random_bandlimited_sym(gr, rng, 1, 0.4));

  MetricField g0 = curve.at(0.0);
  CHECK(g0.data == g.data);

  MetricField gt = curve.at(0.005);
  SmallMat m, inv;
  double max_rel = 0.0;
  for (std::int64_t p = 0; p < gr.size(); ++p) {
    g.fill_matrix(p, m);
    const double d0 = invert(m, 3, inv);
    gt.fill_matrix(p, m);
    const double dt = invert(m, 3, inv);
    max_rel = std::max(max_rel, std::fabs(dt / d0 - 1.0));
  }
  CHECK(max_rel <= 1e-13);
  CHECK(std::fabs(volume(gt) - 1.0) <= 1e-13);

  // the correction beyond gamma + t h is quadratic in t
  auto remainder = [&](double t) {
    MetricField gtt = curve.at(t);
    double r = 0.0;
    for (size_t i = 0; i < gtt.data.size(); ++i)
      r = std::max(r, std::fabs(gtt.data[i] - g.data[i] - t * curve.h.data[i]));
    return r;
  };
  const double r1 = remainder(1e-3), r2 = remainder(2e-3);
  CHECK(r2 / r1 == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("losing positivity reports the maximal safe step") {
  PeriodicGrid gr = torus3(8);
  MetricField g = normalize_volume(curved_metric(gr));
  SymTensorField h_raw(gr);
  for (std::int64_t p = 0; p < gr.size(); ++p) {
    h_raw.comp(p, 0, 1) = 2.0;
    h_raw.comp(p, 1, 2) = 1.0;
  }
  VariationCurve curve = make_curve(g, h_raw);

  CHECK_THROWS_WITH_AS(curve.at(10.0),
                       doctest::Contains("maximal safe t"), std::invalid_argument);
  const double safe = curve.max_safe_t(10.0);
  CHECK(safe > 0.0);
  CHECK(safe < 10.0);
  CHECK_NOTHROW(curve.at(0.9 * safe));

  MetricField bad = curved_metric(gr);  // volume (2 pi)^3, not 1
  CHECK_THROWS_AS(make_curve(bad, h_raw), std::invalid_argument);
}

TEST_CASE("fd derivative matches the z formula and is linear on a negative class") {
  PeriodicGrid gr = torus3(16);
  MetricField gamma = yamabe_base(curved_metric(gr, 0.3));
  SplitMix64 rng(21);
  SymTensorField h1_raw = random_bandlimited_sym(gr, rng, 1, 0.3);
  SymTensorField h2_raw = random_bandlimited_sym(gr, rng, 1, 0.3);
  const std::vector<double> ts = {4e-3, 2e-3, 1e-3};
  SolverConfig cfg = curve_config();

  VariationCurve c1 = make_curve(gamma, h1_raw);
  VariationCurve c2 = make_curve(gamma, h2_raw);
  DerivativeReport r1 = fd_derivative(c1, cfg, ts);
  DerivativeReport r2 = fd_derivative(c2, cfg, ts);
  CHECK_FALSE(r1.basin_jump);
  CHECK(r1.s_base < 0.0);

  const double f1 = formula_derivative(gamma, c1.h);
  const double f2 = formula_derivative(gamma, c2.h);
  CHECK(std::fabs(r1.fd_value - f1) / std::max(std::fabs(r1.fd_value), 1e-8) <= 2e-2);
  CHECK(std::fabs(r2.fd_value - f2) / std::max(std::fabs(r2.fd_value), 1e-8) <= 2e-2);

  // the phi = 1 entry of the Z family reproduces the z formula exactly
  std::vector<ConformalFactor> ones = {ConformalFactor::constant(gr)};
  std::vector<double> zv = formula_derivative_Zphi(gamma, c1.h, ones);
  REQUIRE(zv.size() == 1);
  CHECK(zv[0] == f1);

  // linearity of the derivative in h
  SymTensorField comb(gr);
  for (size_t i = 0; i < comb.data.size(); ++i)
    comb.data[i] = h1_raw.data[i] + 0.5 * h2_raw.data[i];
  DerivativeReport rc = fd_derivative(make_curve(gamma, comb), cfg, ts);
  const double expected = r1.fd_value + 0.5 * r2.fd_value;
  CHECK(std::fabs(rc.fd_value - expected) /
            std::max(std::fabs(expected), 1e-8) <= 5e-2);
}

TEST_CASE("flat class has vanishing derivative in every direction") {
  PeriodicGrid gr = torus3(16);
  MetricField gamma = normalize_volume(MetricField::flat(gr));
  SplitMix64 rng(33);
  // perturbation scaled to the (small) entries of the unit-volume base
  const double scale = 0.4 * gamma.comp(0, 0, 0);
  VariationCurve curve = make_curve(gamma, random_bandlimited_sym(gr, rng, 1, scale));

  CHECK(std::fabs(formula_derivative(gamma, curve.h)) <= 1e-30);
  DerivativeReport rep = fd_derivative(curve, curve_config(), {4e-3, 2e-3, 1e-3});
  CHECK(std::fabs(rep.fd_value) <= 1e-6);
}

TEST_CASE("finite-t identities on a negative class") {
  PeriodicGrid gr = torus3(16);
  MetricField gamma = yamabe_base(curved_metric(gr, 0.3));
  SplitMix64 rng(42);
  VariationCurve curve = make_curve(gamma, random_bandlimited_sym(gr, rng, 1, 0.4));

  IdentityReport rep = identity_checks(curve, curve_config(), {1e-2, 3e-3, 1e-3});
  REQUIRE(rep.rows.size() == 3);
  for (const IdentityRow& row : rep.rows) {
    CHECK(std::fabs(row.vol_identity) <= 1e-12);
    CHECK(row.slack_min >= -1e-8);
    CHECK(row.slack_energy >= -1e-8);
  }
  // the integrated-identity gap shrinks with t at first order
  CHECK(std::fabs(rep.rows.front().gap) < std::fabs(rep.rows.back().gap));
  CHECK(rep.gap_order == doctest::Approx(1.0).epsilon(0.5));
}

TEST_CASE("local maximum half-space test") {
  PeriodicGrid gr = torus3(12);

  // Einstein base: all derivative values vanish, report is consistent
  MetricField flat = normalize_volume(MetricField::flat(gr));
  SplitMix64 rng(55);
  std::vector<SymTensorField> hs;
  hs.push_back(random_bandlimited_sym(gr, rng, 1, 0.3));
  hs.push_back(random_bandlimited_sym(gr, rng, 1, 0.3));
  std::vector<ConformalFactor> ones = {ConformalFactor::constant(gr)};
  LocalMaxReport flat_rep = localmax_test(flat, ones, hs);
  CHECK(flat_rep.local_max_consistent);
  REQUIRE(flat_rep.maxpoint_residuals.size() == 1);
  CHECK(flat_rep.maxpoint_residuals[0] <= 1e-25);
  for (const LocalMaxSample& s : flat_rep.samples)
    CHECK(std::fabs(s.formula_min) <= 1e-30);

  // negative class with z != 0: h = -z has positive derivative, so the base
  // is not a local maximum of the constant over unit-volume metrics
  MetricField gamma = yamabe_base(curved_metric(torus3(16), 0.3));
  GeometryCache geo(gamma);
  CurvatureResult curv = curvature(geo);
  SymTensorField minus_z = curv.z;
  for (double& v : minus_z.data) v = -v;
  std::vector<ConformalFactor> one16 = {ConformalFactor::constant(gamma.grid)};
  LocalMaxReport neg_rep = localmax_test(gamma, one16, {minus_z});
  CHECK_FALSE(neg_rep.local_max_consistent);
  CHECK(neg_rep.samples[0].formula_min > 0.0);
  CHECK(neg_rep.maxpoint_residuals[0] > 0.0);

  CHECK_THROWS_AS(localmax_test(gamma, {}, {minus_z}), std::invalid_argument);
}

TEST_CASE("product curve with constant minimizer matches the reduced formula") {
  ProductGeometry geom;
  geom.n = 3;
  geom.L = 5.0;
  geom.m = 96;
  std::vector<double> ones(geom.m, 1.0);
  WarpedMetric gamma = unit_volume(lift_product(geom, ones));

  WarpedTensor h_raw;
  h_raw.theta.resize(geom.m);
  h_raw.sphere.resize(geom.m);
  for (int i = 0; i < geom.m; ++i) {
    const double th = 2.0 * M_PI * i / geom.m;
    h_raw.theta[i] = 0.4 + 0.2 * std::cos(th + 0.3);
    h_raw.sphere[i] = 0.1 * std::sin(th) - 0.05;
  }
  ProductCurve curve = make_product_curve(gamma, h_raw);

  DerivativeReport rep = product_fd_derivative(curve, geom.m, {4e-3, 2e-3, 1e-3});

  WarpedTensor z = gamma.trace_free_ricci();
  std::vector<double> ip = gamma.inner(z, curve.h);
  const double formula = -gamma.integrate(ip);
  CHECK(std::fabs(rep.fd_value - formula) /
            std::max(std::fabs(formula), 1e-8) <= 1e-5);

  // independent oracle: s = 2 (omega_2 L)^{2/3} on the constant branch, so
  // fd = dY/dL * L'(0) with L'(0) measured from the conformal circle length
  const double L0 = gamma.conformal_circle_length();
  const double eps = 1e-6;
  const double Lp = (curve.at(eps).conformal_circle_length() - L0) / eps;
  const double dYdL = (2.0 / 3.0) * 2.0 * std::pow(4.0 * M_PI, 2.0 / 3.0) *
                      std::pow(L0, -1.0 / 3.0);
  CHECK(rep.fd_value == doctest::Approx(dYdL * Lp).epsilon(1e-3));

  // constant minimizer: every orbit representative gives the same value
  std::vector<double> orbit = product_orbit_formula_values(gamma, ones, curve.h, 8);
  for (double v : orbit) CHECK(v == doctest::Approx(formula).epsilon(1e-10));
}

TEST_CASE("product minimum law across the translation orbit") {
  ProductGeometry geom;
  geom.n = 3;
  geom.L = 1.2 * 2.0 * M_PI;
  geom.m = 96;
  std::vector<ProductSolution> sols = enumerate_yamabe(geom);
  REQUIRE(sols.size() >= 2);
  const ProductSolution& best = sols.front();
  REQUIRE_FALSE(best.is_constant);

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
  const double vmax = *std::max_element(orbit.begin(), orbit.end());
  CHECK(vmax - vmin > 1e-4);  // nonsymmetric h separates the orbit
  CHECK(std::fabs(rep.fd_value - vmin) /
            std::max(std::fabs(vmin), 1e-8) <= 1e-2);

  // the pure length-change direction: difference of the lifted minimizers at
  // L +- delta, pulled back to the fixed coordinate circle. Along it every
  // orbit representative gives the same formula value.
  auto lifted_at = [&](double Lp) {
    ProductGeometry gp = geom;
    gp.L = Lp;
    ProductSolution sp = solve_product(gp, best.phi, best.s_ode);
    REQUIRE(sp.converged);
    WarpedMetric w = gamma;
    const double r = Lp / geom.L;
    for (int i = 0; i < geom.m; ++i) {
      const double u2 = std::pow(sp.phi[i], 4.0 / (geom.n - 2));
      w.A[i] = r * r * u2;
      w.B[i] = u2;
    }
    return unit_volume(w);
  };
  const double dL = 1e-3;
  WarpedMetric up = lifted_at(geom.L + dL), dn = lifted_at(geom.L - dL);
  WarpedTensor sym_raw;
  sym_raw.theta.resize(geom.m);
  sym_raw.sphere.resize(geom.m);
  for (int i = 0; i < geom.m; ++i) {
    sym_raw.theta[i] = (up.A[i] - dn.A[i]) / (2.0 * dL);
    sym_raw.sphere[i] = (up.B[i] - dn.B[i]) / (2.0 * dL);
  }
  WarpedTensor sym = trace_free_project(gamma, sym_raw);
  std::vector<double> sym_orbit =
      product_orbit_formula_values(gamma, best.phi, sym, 16);
  const double smin = *std::min_element(sym_orbit.begin(), sym_orbit.end());
  const double smax = *std::max_element(sym_orbit.begin(), sym_orbit.end());
  const double sscale = std::max(std::fabs(smin), std::fabs(smax));
  CHECK(smax - smin <= 1e-5 * std::max(1.0, sscale));
}

TEST_CASE("product curve positivity error") {
  ProductGeometry geom;
  geom.n = 3;
  geom.L = 5.0;
  geom.m = 64;
  std::vector<double> ones(geom.m, 1.0);
  WarpedMetric gamma = lift_product(geom, ones);
  WarpedTensor h_raw;
  h_raw.theta.assign(geom.m, 3.0);
  h_raw.sphere.assign(geom.m, -1.0);
  ProductCurve curve = make_product_curve(gamma, h_raw);
  CHECK_THROWS_WITH_AS(curve.at(5.0), doctest::Contains("maximal safe t"),
                       std::invalid_argument);

  WarpedTensor bad;
  bad.theta.assign(32, 0.0);
  bad.sphere.assign(geom.m, 0.0);
  CHECK_THROWS_AS(make_product_curve(gamma, bad), std::invalid_argument);
}
