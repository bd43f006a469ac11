#include "yamabe/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace yamabe {

namespace {

json field_json(const PeriodicGrid& g, int rank, int ncomp,
                const std::vector<double>& data) {
  json j;
  j["dim"] = g.dim;
  j["points_per_axis"] = g.points;
  j["periods"] = g.periods;
  j["rank"] = rank;
  j["components"] = ncomp;
  j["data"] = data;
  return j;
}

PeriodicGrid grid_from_json(const json& j) {
  return PeriodicGrid(j.at("points_per_axis").get<std::vector<int>>(),
                      j.at("periods").get<std::vector<double>>());
}

void check_field(const json& j, int rank, int ncomp, std::int64_t npoints) {
  if (j.at("rank").get<int>() != rank)
    throw std::invalid_argument("field: rank mismatch");
  const auto& data = j.at("data");
  if (static_cast<std::int64_t>(data.size()) != npoints * ncomp)
    throw std::invalid_argument("field: data length mismatch");
}

}  // namespace

json field_to_json(const ScalarField& f) {
  return field_json(f.grid, 0, 1, f.data);
}
json field_to_json(const OneFormField& f) {
  return field_json(f.grid, 1, f.ncomp, f.data);
}
json field_to_json(const SymTensorField& f) {
  return field_json(f.grid, 2, f.ncomp, f.data);
}

ScalarField scalar_from_json(const json& j) {
  ScalarField f(grid_from_json(j));
  check_field(j, 0, 1, f.num_points());
  f.data = j.at("data").get<std::vector<double>>();
  return f;
}

OneFormField one_form_from_json(const json& j) {
  OneFormField f(grid_from_json(j));
  check_field(j, 1, f.ncomp, f.num_points());
  f.data = j.at("data").get<std::vector<double>>();
  return f;
}

SymTensorField sym_tensor_from_json(const json& j) {
  SymTensorField f(grid_from_json(j));
  check_field(j, 2, f.ncomp, f.num_points());
  f.data = j.at("data").get<std::vector<double>>();
  return f;
}

MetricField metric_from_json(const json& j) {
  MetricField m(grid_from_json(j));
  check_field(j, 2, m.ncomp, m.num_points());
  m.data = j.at("data").get<std::vector<double>>();
  return m;
}

json solver_config_to_json(const SolverConfig& cfg) {
  json j;
  j["newton_tol"] = cfg.newton_tol;
  j["max_newton"] = cfg.max_newton;
  j["descent_steps"] = cfg.descent_steps;
  j["multistart_count"] = cfg.multistart_count;
  j["seed"] = cfg.seed;
  j["krylov_tol"] = cfg.krylov_tol;
  j["krylov_max_iter"] = cfg.krylov_max_iter;
  j["dedup_tol"] = cfg.dedup_tol;
  return j;
}

json solver_report(const SolverConfig& cfg, const std::vector<YamabeSolution>& sols,
                   bool include_fields) {
  json j;
  j["config"] = solver_config_to_json(cfg);
  json arr = json::array();
  for (const YamabeSolution& s : sols) {
    json e;
    e["s_const"] = s.s_const;
    e["energy"] = s.energy;
    e["residual_linf"] = s.residual_linf;
    e["volume"] = s.volume;
    e["iterations"] = s.iterations;
    e["seed"] = s.seed;
    e["converged"] = s.converged;
    e["duplicates"] = s.duplicates;
    e["residual_history"] = s.residual_history;
    if (include_fields) e["phi"] = field_to_json(s.phi.phi);
    arr.push_back(std::move(e));
  }
  j["solutions"] = std::move(arr);
  return j;
}

void write_branch_csv(std::ostream& os, const std::vector<SolutionBranch>& branches) {
  os << "n,L,branch_id,s_const,S_value,is_yamabe,residual,phi_min,phi_max\n";
  os.precision(17);
  for (size_t b = 0; b < branches.size(); ++b) {
    for (const ProductSolution& s : branches[b].samples) {
      double lo = s.phi.empty() ? 0.0 : s.phi[0], hi = lo;
      for (double v : s.phi) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      os << s.geometry.n << ',' << s.geometry.L << ',' << b << ',' << s.s_const
         << ',' << s.energy << ',' << (s.is_yamabe ? 1 : 0) << ','
         << s.residual_linf << ',' << lo << ',' << hi << '\n';
    }
  }
}

json branch_sidecar(const std::vector<SolutionBranch>& branches) {
  json arr = json::array();
  for (size_t b = 0; b < branches.size(); ++b) {
    json jb;
    jb["branch_id"] = b;
    jb["branch_type"] = branches[b].branch_type;
    jb["bifurcation_points"] = branches[b].bifurcation_points;
    jb["truncated"] = branches[b].truncated;
    jb["diagnostic"] = branches[b].diagnostic;
    json samples = json::array();
    for (const ProductSolution& s : branches[b].samples) {
      json e;
      e["n"] = s.geometry.n;
      e["L"] = s.geometry.L;
      e["m"] = s.geometry.m;
      e["s_ode"] = s.s_ode;
      e["s_const"] = s.s_const;
      e["S_value"] = s.energy;
      e["residual_linf"] = s.residual_linf;
      e["is_constant"] = s.is_constant;
      e["is_yamabe"] = s.is_yamabe;
      e["phase"] = s.phase;
      e["phi"] = s.phi;
      samples.push_back(std::move(e));
    }
    jb["samples"] = std::move(samples);
    arr.push_back(std::move(jb));
  }
  json j;
  j["branches"] = std::move(arr);
  return j;
}

json derivative_report_json(const DerivativeReport& rep) {
  json j;
  j["h_id"] = rep.h_id;
  j["t_samples"] = rep.t_samples;
  j["s_values"] = rep.s_values;
  j["quotients"] = rep.quotients;
  j["s_base"] = rep.s_base;
  j["fd_value"] = rep.fd_value;
  j["extrapolation_order"] = rep.extrapolation_order;
  j["basin_jump"] = rep.basin_jump;
  j["formula_value_z"] = rep.formula_value_z;
  j["formula_values_Zphi"] = rep.formula_values_Zphi;
  j["min_Zphi"] = rep.min_Zphi;
  return j;
}

json identity_report_json(const IdentityReport& rep) {
  json j;
  j["s_base"] = rep.s_base;
  j["gap_order"] = rep.gap_order;
  json rows = json::array();
  for (const IdentityRow& r : rep.rows) {
    json e;
    e["t"] = r.t;
    e["s_t"] = r.s_t;
    e["quotient"] = r.quotient;
    e["gap"] = r.gap;
    e["vol_identity"] = r.vol_identity;
    e["slack_min"] = r.slack_min;
    e["slack_energy"] = r.slack_energy;
    rows.push_back(std::move(e));
  }
  j["rows"] = std::move(rows);
  return j;
}

void write_derivative_csv(std::ostream& os, const std::vector<DerivativeReport>& reps,
                          const IdentityReport* identities) {
  os << "h_id,t,s_t,quotient,extrapolated,formula_z,formula_min_Zphi,gap_2_9\n";
  os.precision(17);
  for (const DerivativeReport& rep : reps) {
    for (size_t i = 0; i < rep.t_samples.size(); ++i) {
      os << rep.h_id << ',' << rep.t_samples[i] << ',' << rep.s_values[i] << ','
         << rep.quotients[i] << ',' << rep.fd_value << ',' << rep.formula_value_z
         << ',' << rep.min_Zphi << ',';
      if (identities) {
        for (const IdentityRow& r : identities->rows) {
          if (r.t == rep.t_samples[i]) {
            os << r.gap;
            break;
          }
        }
      }
      os << '\n';
    }
  }
}

void write_file(const std::string& path, const std::string& contents) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << contents;
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace yamabe
