#pragma once

// Serialization: JSON field containers (self-describing header + flat data
// array), solver and branch reports, derivative and identity reports, and the
// CSV summary tables. Layouts are documented in docs/FORMATS.md.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "yamabe/product.hpp"
#include "yamabe/solver.hpp"
#include "yamabe/variation.hpp"

namespace yamabe {

using json = nlohmann::json;

// Field container: {"dim", "points_per_axis", "periods", "rank", "data"}
// with row-major point order (last axis fastest) and lexicographic (i <= j)
// component order for rank 2.
json field_to_json(const ScalarField& f);
json field_to_json(const OneFormField& f);
json field_to_json(const SymTensorField& f);

ScalarField scalar_from_json(const json& j);
OneFormField one_form_from_json(const json& j);
SymTensorField sym_tensor_from_json(const json& j);
MetricField metric_from_json(const json& j);

json solver_config_to_json(const SolverConfig& cfg);
// Config echo, per-solution residual histories, final (phi, s), dedup counts.
json solver_report(const SolverConfig& cfg, const std::vector<YamabeSolution>& sols,
                   bool include_fields = true);

// Branch table: columns n, L, branch_id, s_const, S_value, is_yamabe,
// residual, phi_min, phi_max. One row per sample, branches concatenated.
void write_branch_csv(std::ostream& os, const std::vector<SolutionBranch>& branches);
// Full phi samples and branch metadata for the CSV rows.
json branch_sidecar(const std::vector<SolutionBranch>& branches);

json derivative_report_json(const DerivativeReport& rep);
json identity_report_json(const IdentityReport& rep);

// Summary table: columns h_id, t, s_t, quotient, extrapolated, formula_z,
// formula_min_Zphi, gap_2_9. The gap column is filled from the identity
// report when one is supplied (matched by t), otherwise left empty.
void write_derivative_csv(std::ostream& os, const std::vector<DerivativeReport>& reps,
                          const IdentityReport* identities = nullptr);

void write_file(const std::string& path, const std::string& contents);

}  // namespace yamabe
