#pragma once

// Config-driven experiment orchestration behind the CLI: schema validation,
// deterministic seeding, experiment execution, report emission, and suite
// aggregation. Exit codes: 0 success, 2 validation error, 3 solver failure,
// 4 tolerance failure in check mode.

#include <string>

#include "yamabe/io.hpp"

namespace yamabe {

struct RunOptions {
  std::string out_dir = ".";
  int threads = 1;
  bool check = false;
};

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitTolerance = 4;

// Thrown on schema violations (unknown keys, missing or ill-typed fields).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Returns the effective config: defaults filled in, every key checked
// against the schema (unknown keys rejected). Throws ConfigError.
json validate_config(const json& config);

// Runs one validated config; writes <name>.json (and <name>.csv for table
// kinds) into opt.out_dir; fills report. Returns 0, 3, or 4.
int execute_experiment(const json& effective, const RunOptions& opt, json& report);

// File-level entry points used by the CLI.
int run_experiment(const std::string& config_path, const RunOptions& opt);
int run_suite(const std::string& manifest_path, const RunOptions& opt);

}  // namespace yamabe
