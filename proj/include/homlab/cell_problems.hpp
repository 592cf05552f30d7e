#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homlab/solvers.hpp"

namespace homlab {

struct EstimateRecord {
  std::string family;
  std::uint64_t seed = 0;
  UnitDirection direction;
  int a = 0;
  int b = 1;
  int t = 0;
  BcMode bc = BcMode::full;
  std::string stencil;
  SolverKind solver = SolverKind::mincut;
  double raw = 0.0;
  std::int64_t raw_int = 0;
  double normalized = 0.0;  // raw / t^{d-1}
  bool exact = true;
  SolveStats stats;
  Vec center{};
  Vec center_offset{};  // rounded center minus requested center
};

/// Full-boundary cell problem. Throws PreconditionError unless bc is full.
EstimateRecord solve_cell(const CellProblemSpec& spec);
/// Top-bottom cell problem. Throws PreconditionError unless bc is top_bottom.
EstimateRecord solve_cell_topbottom(const CellProblemSpec& spec);
/// Either mode.
EstimateRecord solve_any(const CellProblemSpec& spec);

/// Parameters shared by the estimators. The stencil is fitted against the
/// field's direction profile (crofton_stencil(radius, d, profile)).
struct EstimateParams {
  FieldConfig field;
  std::vector<std::uint64_t> seeds{1};
  int d = 2;
  UnitDirection direction = UnitDirection::axis(2, 1);
  int a = 0;
  int b = 1;
  std::vector<int> t_schedule{16, 32, 64, 128};
  BcMode bc = BcMode::full;
  int stencil_radius = 1;
  int collar_width = 0;
  SolverKind solver = SolverKind::mincut;
  int max_sweeps = 20;
  bool metric_override = false;
  int workers = 1;
};

Stencil stencil_for(const EstimateParams& p);

/// Cell problem on Q_t^nu(center) with the datum anchored at the center.
CellProblemSpec make_cell_spec(const EstimateParams& p, std::uint64_t seed, int t, const Vec& center);

struct ConvergenceReport {
  std::vector<int> t;
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<int> count;
  double diff_slope = 0.0;      // log-log slope of |mean(t) - mean(t_max)|, t < t_max
  double variance_slope = 0.0;  // log-log slope of variance(t)
  double estimate = 0.0;        // mean at t_max
  double bootstrap_se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool exact = true;            // all records exact
};

struct EstimateResult {
  ConvergenceReport report;
  std::vector<EstimateRecord> records;  // sorted by (t, seed)
};

ConvergenceReport summarize(const std::vector<EstimateRecord>& records);

/// Centered cells Q_t^nu(0), one solve per (t, seed).
EstimateResult estimate_ghom(const EstimateParams& p);
/// Cells Q_t^nu(round(t x0)); x0 = 0 reproduces estimate_ghom.
EstimateResult estimate_ghom_shifted(const Vec& x0, const EstimateParams& p);

struct MuResult {
  double value = 0.0;        // raw / m^{d-1}
  std::int64_t raw_int = 0;  // integerized minimum on I^nu
  std::int64_t m = 1;
};

/// mu(I) on the oriented region I^nu, full datum collar, datum through 0.
MuResult mu_process(const IntervalBox& box, const UnitDirection& nu, int a, int b,
                    const SurfaceTensionField& field, const Stencil& stencil,
                    SolverKind solver = SolverKind::mincut, int max_sweeps = 20);

struct TriangleCheck {
  int a = 0, b = 1, c = 2;
  double lhs = 0.0;  // g(a,b)
  double rhs = 0.0;  // g(a,c) + g(c,b)
  double tolerance = 0.0;
  bool pass = true;
};

struct TriangleReport {
  int num_labels = 3;
  std::vector<std::vector<double>> g;   // g[a][b] estimate, ordered pairs
  std::vector<std::vector<double>> se;  // standard error over seeds
  std::vector<std::vector<double>> gap; // observed alpha / brute relative gap at small t
  std::vector<TriangleCheck> checks;
  std::vector<EstimateRecord> records;
  bool pass = true;
};

/// g(a,b) <= g(a,c) + g(c,b) + 3 sigma (+ gap allowance for inexact solves)
/// over all ordered triples, at side p.t_schedule.back().
TriangleReport triangle_audit(const EstimateParams& p);
/// The statistics and checks of triangle_audit on already solved records.
TriangleReport evaluate_triangle(const EstimateParams& p, std::vector<EstimateRecord> records);

}  // namespace homlab
