#pragma once

#include <vector>

namespace homlab {

struct LinearProgramResult {
  std::vector<double> x;
  double objective = 0.0;
  int pivots = 0;
};

/// Dense two-phase simplex for
///   minimize c.x  subject to  a_ub x <= b_ub,  a_eq x = b_eq,  x >= 0.
/// Small problems only (a few hundred rows). Throws DomainError when the
/// program is infeasible or unbounded.
LinearProgramResult solve_linear_program(const std::vector<double>& c,
                                         const std::vector<std::vector<double>>& a_ub,
                                         const std::vector<double>& b_ub,
                                         const std::vector<std::vector<double>>& a_eq,
                                         const std::vector<double>& b_eq);

}  // namespace homlab
