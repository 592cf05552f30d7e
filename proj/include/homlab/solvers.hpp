#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "homlab/lattice_energy.hpp"

namespace homlab {

struct SolveStats {
  int iterations = 0;           // expansion sweeps, or 1
  std::int64_t augmentations = 0;
  std::int64_t evaluated = 0;   // brute force: assignments visited
  double wall_ms = 0.0;
  std::vector<std::int64_t> sweep_energies;  // alpha: energy after each sweep
};

struct SolveResult {
  LabelField argmin;
  double value = 0.0;            // discrete_energy(argmin), real weights
  std::int64_t value_int = 0;    // discrete_energy_int(argmin)
  bool exact = true;
  SolveStats stats;
};

/// Exhaustive minimum over all labelings of the free cells; the cell with the
/// largest index varies fastest and the first minimum found is kept.
/// Throws CapacityError when #free * log2(K) > 24.
SolveResult brute_force_min(const LatticeProblem& problem);
SolveResult brute_force_min(const CellProblemSpec& spec);

/// Exact minimum for K = 2 by a single max-flow. Throws DomainError for K != 2.
SolveResult mincut_two_label(const LatticeProblem& problem);
SolveResult mincut_two_label(const CellProblemSpec& spec);

/// Alpha-expansion with labels cycled 0..K-1, starting from the datum.
/// Throws PreconditionError when the field fails metric_check and
/// metric_override is false. K >= 3 results are marked inexact.
SolveResult alpha_expansion(const LatticeProblem& problem, int max_sweeps, bool metric_override = false);
SolveResult alpha_expansion(const CellProblemSpec& spec);

/// Dispatch on spec.solver.
SolveResult solve(const CellProblemSpec& spec);
SolveResult solve(const LatticeProblem& problem, SolverKind kind, int max_sweeps = 20,
                  bool metric_override = false);

struct MetricReport {
  bool ok = true;
  std::array<int, 3> worst{-1, -1, -1};  // (a, c, b) maximizing g(a,b) - g(a,c) - g(c,b)
  double worst_excess = 0.0;
};

/// Checks g(x,a,b,nu) <= g(x,a,c,nu) + g(x,c,b,nu) for all label triples on
/// a fixed sample of points and normals (relative slack 1e-12).
MetricReport metric_check(const SurfaceTensionField& field, int d = 2, int samples = 64);

}  // namespace homlab
