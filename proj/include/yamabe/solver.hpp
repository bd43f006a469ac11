#pragma once

// Constant-scalar-curvature (Yamabe) representatives of a discretized
// conformal class: Newton on the pair (phi, s) with the conformal-volume
// constraint, energy-descent globalization, and seeded multistart with
// deduplication.

#include <cstdint>
#include <optional>
#include <vector>

#include "yamabe/conformal.hpp"

namespace yamabe {

struct SolverConfig {
  double newton_tol = 1e-10;   // on ||residual||_inf
  int max_newton = 50;
  int descent_steps = 200;     // energy-descent preprocessing iterations
  int multistart_count = 10;
  std::uint64_t seed = 0;
  double krylov_tol = 1e-2;    // inexact-Newton forcing factor
  int krylov_max_iter = 4000;
  double dedup_tol = 1e-4;     // L2(phi) distance identifying a solution class

  void validate() const;
};

struct YamabeSolution {
  ConformalFactor phi;
  double s_const = 0.0;        // constant scalar curvature of the representative
  double energy = 0.0;         // total scalar curvature; equals s_const at unit volume
  double residual_linf = 0.0;
  double volume = 0.0;         // conformal volume (1 after normalization)
  int iterations = 0;          // Newton corrections taken
  std::uint64_t seed = 0;      // multistart label (0 = constant start)
  bool converged = false;
  std::vector<double> residual_history;
  int duplicates = 0;          // extra starts that landed in this solution class
};

// Solve the constant-curvature equation in the class of g, starting from init
// (constant 1 if absent). Non-convergence is reported through the converged
// flag and the residual history, not an exception.
YamabeSolution solve_csc(const MetricField& g, const SolverConfig& cfg,
                         const std::optional<ConformalFactor>& init = std::nullopt);

// Constant start plus multistart_count random band-limited positive starts;
// converged results deduplicated by L2 distance of phi and sorted by energy
// (the head is the numerical Yamabe representative).
std::vector<YamabeSolution> multistart_enumerate(const MetricField& g,
                                                 const SolverConfig& cfg);

}  // namespace yamabe
