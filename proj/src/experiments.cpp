#include "yamabe/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "yamabe/random_fields.hpp"
#include "yamabe/richardson.hpp"
#include "yamabe/variation.hpp"

namespace yamabe {

namespace {

// ---- schema -------------------------------------------------------------

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

double need_number(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
  if (!obj.at(key).is_number())
    throw ConfigError("key '" + key + "' in " + where + " must be a number");
  return obj.at(key).get<double>();
}

json normalize_geometry(const json& g) {
  if (!g.is_object()) throw ConfigError("geometry must be an object");
  const std::string type = g.value("type", "");
  json out;
  if (type == "grid") {
    reject_unknown(g, {"type", "points", "metric", "amplitude"}, "geometry");
    out["type"] = "grid";
    out["points"] = static_cast<int>(need_number(g, "points", "geometry"));
    if (out["points"].get<int>() < 8 || out["points"].get<int>() % 2 != 0)
      throw ConfigError("geometry.points must be even and >= 8");
    const std::string metric = g.value("metric", "");
    if (metric != "flat" && metric != "conformally-flat" && metric != "curved")
      throw ConfigError("geometry.metric must be flat, conformally-flat or curved");
    out["metric"] = metric;
    out["amplitude"] = g.value("amplitude", 0.2);
  } else if (type == "product") {
    reject_unknown(g, {"type", "n", "L", "m"}, "geometry");
    out["type"] = "product";
    out["n"] = static_cast<int>(need_number(g, "n", "geometry"));
    out["L"] = need_number(g, "L", "geometry");
    out["m"] = g.contains("m") ? static_cast<int>(need_number(g, "m", "geometry")) : 128;
    ProductGeometry pg;
    pg.n = out["n"].get<int>();
    pg.L = out["L"].get<double>();
    pg.m = out["m"].get<int>();
    pg.validate();
  } else {
    throw ConfigError("geometry.type must be 'grid' or 'product'");
  }
  return out;
}

json normalize_solver(const json& s) {
  if (!s.is_object()) throw ConfigError("solver must be an object");
  reject_unknown(s,
                 {"newton_tol", "max_newton", "descent_steps", "multistart_count",
                  "krylov_tol", "krylov_max_iter", "dedup_tol"},
                 "solver");
  SolverConfig def;
  json out;
  out["newton_tol"] = s.value("newton_tol", def.newton_tol);
  out["max_newton"] = s.value("max_newton", def.max_newton);
  out["descent_steps"] = s.value("descent_steps", def.descent_steps);
  out["multistart_count"] = s.value("multistart_count", def.multistart_count);
  out["krylov_tol"] = s.value("krylov_tol", def.krylov_tol);
  out["krylov_max_iter"] = s.value("krylov_max_iter", def.krylov_max_iter);
  out["dedup_tol"] = s.value("dedup_tol", def.dedup_tol);
  return out;
}

json normalize_h_samples(const json& h) {
  if (!h.is_object()) throw ConfigError("h_samples must be an object");
  reject_unknown(h, {"count", "max_mode", "amplitude"}, "h_samples");
  json out;
  out["count"] = h.value("count", 1);
  out["max_mode"] = h.value("max_mode", 1);
  out["amplitude"] = h.value("amplitude", 0.2);
  if (out["count"].get<int>() < 1) throw ConfigError("h_samples.count must be >= 1");
  return out;
}

const std::set<std::string>& tolerance_keys(const std::string& kind) {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"curvature", {"max_abs_s", "closed_form_error"}},
      {"solve", {"residual", "volume_error", "s_const_abs_max", "expected_classes"}},
      {"branch", {"bifurcation_tol"}},
      {"derivative", {"fd_formula_rel", "fd_min_rel"}},
      {"identities", {"vol_identity_max", "gap_order_dev", "slack_tol"}},
      {"localmax", {"require_consistent"}},
  };
  return keys.at(kind);
}

SolverConfig solver_from_json(const json& s, std::uint64_t seed) {
  SolverConfig cfg;
  cfg.newton_tol = s.at("newton_tol").get<double>();
  cfg.max_newton = s.at("max_newton").get<int>();
  cfg.descent_steps = s.at("descent_steps").get<int>();
  cfg.multistart_count = s.at("multistart_count").get<int>();
  cfg.krylov_tol = s.at("krylov_tol").get<double>();
  cfg.krylov_max_iter = s.at("krylov_max_iter").get<int>();
  cfg.dedup_tol = s.at("dedup_tol").get<double>();
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

// ---- model classes ------------------------------------------------------

double grid_coordinate(const PeriodicGrid& g, std::int64_t p, int axis) {
  int idx[kMaxDim];
  g.coords(p, idx);
  return g.coordinate(idx[axis], axis);
}

MetricField build_grid_metric(const json& geom) {
  PeriodicGrid gr = PeriodicGrid::cube(3, geom.at("points").get<int>(), 2.0 * M_PI);
  const std::string metric = geom.at("metric").get<std::string>();
  const double a = geom.at("amplitude").get<double>();
  MetricField m(gr);
  if (metric == "flat") {
    m = MetricField::flat(gr);
  } else if (metric == "conformally-flat") {
    for (std::int64_t p = 0; p < m.num_points(); ++p) {
      const double f = std::exp(2.0 * a * std::sin(grid_coordinate(gr, p, 0)));
      for (int i = 0; i < 3; ++i) m.comp(p, i, i) = f;
    }
  } else {  // curved: diagonal with transverse dependence, nonzero Cotton
    for (std::int64_t p = 0; p < m.num_points(); ++p) {
      m.comp(p, 0, 0) = 1.0 + a * std::sin(grid_coordinate(gr, p, 1));
      m.comp(p, 1, 1) = 1.0 + 0.8 * a * std::sin(grid_coordinate(gr, p, 2));
      m.comp(p, 2, 2) = 1.0 + 0.9 * a * std::cos(grid_coordinate(gr, p, 0));
    }
  }
  return m;
}

ProductGeometry build_product_geometry(const json& geom) {
  ProductGeometry pg;
  pg.n = geom.at("n").get<int>();
  pg.L = geom.at("L").get<double>();
  pg.m = geom.at("m").get<int>();
  return pg;
}

ScalarField exact_conf_flat_scalar(const PeriodicGrid& g, double a) {
  ScalarField s(g);
  const int n = g.dim;
  for (std::int64_t p = 0; p < s.num_points(); ++p) {
    const double x = grid_coordinate(g, p, 0);
    const double w = a * std::sin(x);
    const double lapw = -a * std::sin(x);
    const double gradw2 = a * a * std::cos(x) * std::cos(x);
    s(p) = std::exp(-2.0 * w) * (-2.0 * (n - 1) * lapw - (n - 1) * (n - 2) * gradw2);
  }
  return s;
}

WarpedMetric unit_volume_warped(WarpedMetric g) {
  const double c0 = std::pow(g.volume(), -2.0 / g.n);
  for (double& a : g.A) a *= c0;
  for (double& b : g.B) b *= c0;
  return g;
}

// random circle perturbation with a handful of low modes
WarpedTensor random_warped_tensor(int m, double L, SplitMix64 rng, double amplitude) {
  WarpedTensor h;
  h.theta.resize(m);
  h.sphere.resize(m);
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<double>& v = comp == 0 ? h.theta : h.sphere;
    const double a0 = rng.uniform(-1.0, 1.0);
    double ak[2], bk[2];
    for (int k = 0; k < 2; ++k) {
      ak[k] = rng.uniform(-1.0, 1.0);
      bk[k] = rng.uniform(-1.0, 1.0);
    }
    for (int i = 0; i < m; ++i) {
      const double th = 2.0 * M_PI * i / m;
      double s = a0;
      for (int k = 0; k < 2; ++k)
        s += ak[k] * std::cos((k + 1) * th) + bk[k] * std::sin((k + 1) * th);
      v[i] = amplitude * s / std::sqrt(5.0);
    }
  }
  (void)L;
  return h;
}

// ---- checks -------------------------------------------------------------

struct CheckSet {
  json entries = json::array();
  bool all_pass = true;

  void add(const std::string& name, double value, double tol, bool pass) {
    json e;
    e["name"] = name;
    e["value"] = value;
    e["tolerance"] = tol;
    e["pass"] = pass;
    entries.push_back(std::move(e));
    all_pass = all_pass && pass;
  }
  // upper bound check: value <= tol
  void bound(const json& tols, const std::string& key, double value) {
    if (!tols.contains(key)) return;
    const double tol = tols.at(key).get<double>();
    add(key, value, tol, value <= tol);
  }
};

double rel_dev(double value, double reference) {
  return std::fabs(value - reference) / std::max(std::fabs(reference), 1e-8);
}

// ---- experiment kinds ---------------------------------------------------

int run_curvature(const json& cfg, json& results, CheckSet& checks) {
  const json& geom = cfg.at("geometry");
  if (geom.at("type") != "grid") throw ConfigError("curvature needs grid geometry");
  MetricField g = build_grid_metric(geom);
  CurvatureResult curv = curvature(g);
  results["max_abs_s"] = linf_norm(curv.s);
  GeometryCache geo(g);
  results["trace_z_l2"] = l2_norm(geo, tensor_inner(geo, curv.z, g));
  if (geom.at("metric") == "conformally-flat") {
    ScalarField exact = exact_conf_flat_scalar(g.grid, geom.at("amplitude").get<double>());
    double err = 0.0;
    for (std::int64_t p = 0; p < exact.num_points(); ++p)
      err = std::max(err, std::fabs(curv.s(p) - exact(p)));
    results["closed_form_error"] = err;
    checks.bound(cfg.at("tolerances"), "closed_form_error", err);
  }
  checks.bound(cfg.at("tolerances"), "max_abs_s", results["max_abs_s"].get<double>());
  return kExitOk;
}

int run_solve(const json& cfg, json& results, CheckSet& checks) {
  const json& geom = cfg.at("geometry");
  if (geom.at("type") != "grid") throw ConfigError("solve needs grid geometry");
  MetricField g = build_grid_metric(geom);
  SolverConfig scfg = solver_from_json(cfg.at("solver"), cfg.at("seed").get<std::uint64_t>());
  std::vector<YamabeSolution> sols = multistart_enumerate(g, scfg);
  if (sols.empty() || !sols.front().converged) return kExitSolver;
  results["report"] = solver_report(scfg, sols, false);
  results["classes"] = sols.size();
  const YamabeSolution& best = sols.front();
  const json& tols = cfg.at("tolerances");
  checks.bound(tols, "residual", best.residual_linf);
  checks.bound(tols, "volume_error", std::fabs(best.volume - 1.0));
  checks.bound(tols, "s_const_abs_max", std::fabs(best.s_const));
  if (tols.contains("expected_classes")) {
    const double want = tols.at("expected_classes").get<double>();
    checks.add("expected_classes", double(sols.size()), want,
               double(sols.size()) == want);
  }
  return kExitOk;
}

int run_branch(const json& cfg, json& results, CheckSet& checks, std::string& csv) {
  const json& geom = cfg.at("geometry");
  if (geom.at("type") != "product") throw ConfigError("branch needs product geometry");
  ProductGeometry pg = build_product_geometry(geom);
  const double L_end = cfg.at("L_end").get<double>();

  std::vector<double> ones(pg.m, 1.0);
  ProductSolution seed = solve_product(pg, ones, pg.sphere_scalar());
  if (!seed.converged) return kExitSolver;
  std::vector<SolutionBranch> branches;
  branches.push_back(continue_branch(pg, L_end, seed));
  for (double b : branches.front().bifurcation_points)
    branches.push_back(branch_switch(pg, b, L_end));

  std::ostringstream os;
  write_branch_csv(os, branches);
  csv = os.str();
  results["sidecar"] = branch_sidecar(branches);
  results["bifurcation_points"] = branches.front().bifurcation_points;

  const json& tols = cfg.at("tolerances");
  if (tols.contains("bifurcation_tol") && cfg.contains("expected_bifurcations")) {
    const double tol = tols.at("bifurcation_tol").get<double>();
    for (const auto& e : cfg.at("expected_bifurcations")) {
      const double want = e.get<double>();
      double best = 1e300;
      for (double b : branches.front().bifurcation_points)
        best = std::min(best, std::fabs(b - want));
      checks.add("bifurcation_tol", best, tol, best <= tol);
    }
  }
  return kExitOk;
}

// Yamabe representative of the class of g, unit volume.
MetricField grid_base(const MetricField& g, const SolverConfig& cfg) {
  YamabeSolution sol = solve_csc(g, cfg);
  if (!sol.converged) throw std::runtime_error("base solve did not converge");
  return normalize_volume(conformal_metric(g, sol.phi));
}

int run_derivative(const json& cfg, json& results, CheckSet& checks, std::string& csv) {
  const json& geom = cfg.at("geometry");
  const json& hs = cfg.at("h_samples");
  const json& tols = cfg.at("tolerances");
  std::vector<double> t_list = cfg.at("t_list").get<std::vector<double>>();
  SplitMix64 root(cfg.at("seed").get<std::uint64_t>());
  std::vector<DerivativeReport> reports;

  if (geom.at("type") == "grid") {
    MetricField g = build_grid_metric(geom);
    SolverConfig scfg =
        solver_from_json(cfg.at("solver"), cfg.at("seed").get<std::uint64_t>());
    MetricField gamma = grid_base(g, scfg);
    std::vector<YamabeSolution> sols = multistart_enumerate(gamma, scfg);
    std::vector<ConformalFactor> phis;
    for (const YamabeSolution& s : sols)
      if (s.converged) phis.push_back(s.phi);
    for (int k = 0; k < hs.at("count").get<int>(); ++k) {
      SplitMix64 child = root.split(100 + k);
      SymTensorField h_raw = random_bandlimited_sym(
          gamma.grid, child, hs.at("max_mode").get<int>(),
          hs.at("amplitude").get<double>());
      VariationCurve curve = make_curve(gamma, h_raw);
      DerivativeReport rep = fd_derivative(curve, scfg, t_list);
      rep.h_id = "h" + std::to_string(k);
      rep.formula_value_z = formula_derivative(gamma, curve.h);
      rep.formula_values_Zphi = formula_derivative_Zphi(gamma, curve.h, phis);
      rep.min_Zphi =
          *std::min_element(rep.formula_values_Zphi.begin(),
                            rep.formula_values_Zphi.end());
      checks.bound(tols, "fd_formula_rel", rel_dev(rep.fd_value, rep.formula_value_z));
      reports.push_back(std::move(rep));
    }
  } else {
    ProductGeometry pg = build_product_geometry(geom);
    std::vector<ProductSolution> sols = enumerate_yamabe(pg);
    if (sols.empty() || !sols.front().converged) return kExitSolver;
    const ProductSolution& best = sols.front();
    WarpedMetric gamma = unit_volume_warped(lift_product(pg, best.phi));
    const int orbit = cfg.at("orbit_samples").get<int>();
    for (int k = 0; k < hs.at("count").get<int>(); ++k) {
      WarpedTensor h_raw = random_warped_tensor(pg.m, pg.L, root.split(100 + k),
                                                hs.at("amplitude").get<double>());
      ProductCurve curve = make_product_curve(gamma, h_raw);
      DerivativeReport rep = product_fd_derivative(curve, pg.m, t_list);
      rep.h_id = "h" + std::to_string(k);
      WarpedTensor z = gamma.trace_free_ricci();
      std::vector<double> ip = gamma.inner(z, curve.h);
      rep.formula_value_z = -gamma.integrate(ip);
      rep.formula_values_Zphi =
          product_orbit_formula_values(gamma, best.phi, curve.h, orbit);
      rep.min_Zphi =
          *std::min_element(rep.formula_values_Zphi.begin(),
                            rep.formula_values_Zphi.end());
      checks.bound(tols, "fd_min_rel", rel_dev(rep.fd_value, rep.min_Zphi));
      reports.push_back(std::move(rep));
    }
  }

  json arr = json::array();
  for (const DerivativeReport& rep : reports) arr.push_back(derivative_report_json(rep));
  results["derivatives"] = std::move(arr);
  std::ostringstream os;
  write_derivative_csv(os, reports);
  csv = os.str();
  return kExitOk;
}

int run_identities(const json& cfg, json& results, CheckSet& checks) {
  const json& geom = cfg.at("geometry");
  if (geom.at("type") != "grid") throw ConfigError("identities needs grid geometry");
  const json& hs = cfg.at("h_samples");
  MetricField g = build_grid_metric(geom);
  SolverConfig scfg =
      solver_from_json(cfg.at("solver"), cfg.at("seed").get<std::uint64_t>());
  MetricField gamma = grid_base(g, scfg);
  SplitMix64 root(cfg.at("seed").get<std::uint64_t>());
  SplitMix64 child = root.split(100);
  SymTensorField h_raw = random_bandlimited_sym(gamma.grid, child,
                                                hs.at("max_mode").get<int>(),
                                                hs.at("amplitude").get<double>());
  VariationCurve curve = make_curve(gamma, h_raw);
  IdentityReport rep =
      identity_checks(curve, scfg, cfg.at("t_list").get<std::vector<double>>());
  results["identities"] = identity_report_json(rep);

  double vol_max = 0.0, slack_min = 0.0;
  for (const IdentityRow& r : rep.rows) {
    vol_max = std::max(vol_max, std::fabs(r.vol_identity));
    slack_min = std::min({slack_min, r.slack_min, r.slack_energy});
  }
  const json& tols = cfg.at("tolerances");
  checks.bound(tols, "vol_identity_max", vol_max);
  checks.bound(tols, "gap_order_dev", std::fabs(rep.gap_order - 1.0));
  checks.bound(tols, "slack_tol", -slack_min);
  return kExitOk;
}

int run_localmax(const json& cfg, json& results, CheckSet& checks) {
  const json& geom = cfg.at("geometry");
  if (geom.at("type") != "grid") throw ConfigError("localmax needs grid geometry");
  const json& hs = cfg.at("h_samples");
  MetricField g = build_grid_metric(geom);
  SolverConfig scfg =
      solver_from_json(cfg.at("solver"), cfg.at("seed").get<std::uint64_t>());
  MetricField gamma = grid_base(g, scfg);
  std::vector<YamabeSolution> sols = multistart_enumerate(gamma, scfg);
  std::vector<ConformalFactor> phis;
  for (const YamabeSolution& s : sols)
    if (s.converged) phis.push_back(s.phi);
  if (phis.empty()) return kExitSolver;

  SplitMix64 root(cfg.at("seed").get<std::uint64_t>());
  std::vector<SymTensorField> h_samples;
  for (int k = 0; k < hs.at("count").get<int>(); ++k) {
    SplitMix64 child = root.split(100 + k);
    h_samples.push_back(random_bandlimited_sym(gamma.grid, child,
                                               hs.at("max_mode").get<int>(),
                                               hs.at("amplitude").get<double>()));
  }
  LocalMaxReport rep = localmax_test(gamma, phis, h_samples);
  json samples = json::array();
  for (const LocalMaxSample& s : rep.samples) {
    json e;
    e["h_id"] = s.h_id;
    e["formula_min"] = s.formula_min;
    e["nonpositive"] = s.nonpositive;
    samples.push_back(std::move(e));
  }
  results["samples"] = std::move(samples);
  results["local_max_consistent"] = rep.local_max_consistent;
  results["maxpoint_residuals"] = rep.maxpoint_residuals;

  const json& tols = cfg.at("tolerances");
  if (tols.contains("require_consistent")) {
    const bool want = tols.at("require_consistent").get<double>() != 0.0;
    checks.add("require_consistent", rep.local_max_consistent ? 1.0 : 0.0,
               want ? 1.0 : 0.0, rep.local_max_consistent == want);
  }
  return kExitOk;
}

}  // namespace

json validate_config(const json& config) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  if (!config.contains("kind") || !config.at("kind").is_string())
    throw ConfigError("config needs a string 'kind'");
  const std::string kind = config.at("kind").get<std::string>();

  std::set<std::string> allowed = {"name", "kind", "seed", "geometry", "tolerances"};
  if (kind == "curvature") {
  } else if (kind == "solve") {
    allowed.insert("solver");
  } else if (kind == "branch") {
    allowed.insert("L_end");
    allowed.insert("expected_bifurcations");
  } else if (kind == "derivative") {
    allowed.insert({"solver", "h_samples", "t_list", "orbit_samples"});
  } else if (kind == "identities") {
    allowed.insert({"solver", "h_samples", "t_list"});
  } else if (kind == "localmax") {
    allowed.insert({"solver", "h_samples"});
  } else {
    throw ConfigError("unknown kind '" + kind + "'");
  }
  reject_unknown(config, allowed, "config");

  json out;
  out["kind"] = kind;
  out["name"] = config.value("name", kind);
  if (config.contains("seed") && !config.at("seed").is_number_unsigned())
    throw ConfigError("seed must be an unsigned integer");
  out["seed"] = config.value("seed", std::uint64_t(0));
  if (!config.contains("geometry")) throw ConfigError("config needs 'geometry'");
  out["geometry"] = normalize_geometry(config.at("geometry"));

  if (allowed.count("solver"))
    out["solver"] = normalize_solver(config.value("solver", json::object()));
  if (allowed.count("h_samples"))
    out["h_samples"] = normalize_h_samples(config.value("h_samples", json::object()));
  if (allowed.count("t_list")) {
    json tl = config.value("t_list", json::array({4e-3, 2e-3, 1e-3}));
    if (!tl.is_array() || tl.size() < 2)
      throw ConfigError("t_list must be an array of at least 2 step sizes");
    for (const auto& v : tl)
      if (!v.is_number() || v.get<double>() <= 0.0)
        throw ConfigError("t_list entries must be positive numbers");
    out["t_list"] = tl;
  }
  if (allowed.count("orbit_samples")) {
    out["orbit_samples"] = config.value("orbit_samples", 16);
    if (out["orbit_samples"].get<int>() < 1)
      throw ConfigError("orbit_samples must be >= 1");
  }
  if (kind == "branch") {
    out["L_end"] = need_number(config, "L_end", "config");
    if (config.contains("expected_bifurcations")) {
      if (!config.at("expected_bifurcations").is_array())
        throw ConfigError("expected_bifurcations must be an array");
      out["expected_bifurcations"] = config.at("expected_bifurcations");
    }
  }

  json tols = config.value("tolerances", json::object());
  if (!tols.is_object()) throw ConfigError("tolerances must be an object");
  for (auto it = tols.begin(); it != tols.end(); ++it) {
    if (!tolerance_keys(kind).count(it.key()))
      throw ConfigError("unknown tolerance '" + it.key() + "' for kind " + kind);
    if (!it.value().is_number())
      throw ConfigError("tolerance '" + it.key() + "' must be a number");
  }
  out["tolerances"] = tols;
  return out;
}

int execute_experiment(const json& effective, const RunOptions& opt, json& report) {
  const std::string kind = effective.at("kind").get<std::string>();
  const std::string name = effective.at("name").get<std::string>();
  report = json::object();
  report["name"] = name;
  report["kind"] = kind;
  report["config_echo"] = effective;
  report["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();

  json results = json::object();
  CheckSet checks;
  std::string csv;
  int code = kExitOk;
  try {
    if (kind == "curvature") code = run_curvature(effective, results, checks);
    else if (kind == "solve") code = run_solve(effective, results, checks);
    else if (kind == "branch") code = run_branch(effective, results, checks, csv);
    else if (kind == "derivative") code = run_derivative(effective, results, checks, csv);
    else if (kind == "identities") code = run_identities(effective, results, checks);
    else code = run_localmax(effective, results, checks);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    report["error"] = e.what();
    code = kExitSolver;
  }

  report["results"] = std::move(results);
  report["checks"] = checks.entries;
  if (code == kExitOk && !checks.all_pass && opt.check) code = kExitTolerance;
  report["status"] = code == kExitOk && checks.all_pass ? "pass"
                     : code == kExitSolver              ? "solver-failure"
                                                        : "fail";

  write_file(opt.out_dir + "/" + name + ".json", report.dump(2) + "\n");
  if (!csv.empty()) write_file(opt.out_dir + "/" + name + ".csv", csv);
  return code;
}

int run_experiment(const std::string& config_path, const RunOptions& opt) {
  json config;
  try {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot read config: " + config_path);
    config = json::parse(is);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  }
  json effective;
  try {
    effective = validate_config(config);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  }
  json report;
  return execute_experiment(effective, opt, report);
}

int run_suite(const std::string& manifest_path, const RunOptions& opt) {
  json manifest;
  std::string dir = ".";
  try {
    std::ifstream is(manifest_path);
    if (!is) throw ConfigError("cannot read manifest: " + manifest_path);
    manifest = json::parse(is);
    const size_t slash = manifest_path.find_last_of('/');
    if (slash != std::string::npos) dir = manifest_path.substr(0, slash);
    if (!manifest.is_object() || !manifest.contains("experiments") ||
        !manifest.at("experiments").is_array())
      throw ConfigError("manifest needs an 'experiments' array");
  } catch (const std::exception& e) {
    std::cerr << "manifest error: " << e.what() << "\n";
    return kExitValidation;
  }

  std::vector<std::string> paths;
  for (const auto& e : manifest.at("experiments")) {
    if (!e.is_string()) {
      std::cerr << "manifest error: experiment entries must be path strings\n";
      return kExitValidation;
    }
    std::string p = e.get<std::string>();
    if (!p.empty() && p[0] != '/') p = dir + "/" + p;
    paths.push_back(p);
  }

  std::vector<int> codes(paths.size(), 0);
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= paths.size()) break;
      codes[i] = run_experiment(paths[i], opt);
    }
  };
  const int nthreads = std::max(1, std::min<int>(opt.threads, paths.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  json table = json::array();
  int exit_code = kExitOk;
  std::cout << "experiment,exit,status\n";
  for (size_t i = 0; i < paths.size(); ++i) {
    const char* status = codes[i] == kExitOk          ? "pass"
                         : codes[i] == kExitTolerance ? "tolerance-failure"
                         : codes[i] == kExitSolver    ? "solver-failure"
                                                      : "validation-failure";
    std::cout << paths[i] << ',' << codes[i] << ',' << status << "\n";
    json row;
    row["path"] = paths[i];
    row["exit"] = codes[i];
    row["status"] = status;
    table.push_back(std::move(row));
    if (codes[i] == kExitTolerance) exit_code = kExitTolerance;
  }
  if (exit_code == kExitOk)
    for (int c : codes)
      if (c != kExitOk) exit_code = c;

  json suite;
  suite["experiments"] = std::move(table);
  write_file(opt.out_dir + "/suite.json", suite.dump(2) + "\n");
  return exit_code;
}

}  // namespace yamabe
