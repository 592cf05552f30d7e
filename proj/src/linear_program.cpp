#include "homlab/linear_program.hpp"

#include <cmath>
#include <limits>

#include "homlab/errors.hpp"

namespace homlab {

namespace {

constexpr double kEps = 1e-10;

class Tableau {
 public:
  Tableau(int rows, int cols) : rows_(rows), cols_(cols), t_((rows + 1) * (cols + 1), 0.0) {}

  double& at(int r, int c) { return t_[r * (cols_ + 1) + c]; }
  double& rhs(int r) { return at(r, cols_); }
  double& cost(int c) { return at(rows_, c); }
  double& objective() { return at(rows_, cols_); }

  void pivot(int pr, int pc) {
    const double inv = 1.0 / at(pr, pc);
    for (int c = 0; c <= cols_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (int r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      double* row = &t_[r * (cols_ + 1)];
      const double* prow = &t_[pr * (cols_ + 1)];
      for (int c = 0; c <= cols_; ++c) row[c] -= f * prow[c];
      row[pc] = 0.0;
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

 private:
  int rows_;
  int cols_;
  std::vector<double> t_;
};

// Runs simplex iterations on the current objective row. Columns with
// allowed[c] == false never enter. Dantzig pricing, falling back to Bland's
// rule after a run of degenerate pivots.
void run_simplex(Tableau& t, std::vector<int>& basis, const std::vector<bool>& allowed, int& pivots) {
  int degenerate_run = 0;
  for (int iter = 0; iter < 200000; ++iter) {
    const bool bland = degenerate_run > 50;
    int enter = -1;
    double best = -kEps;
    for (int c = 0; c < t.cols(); ++c) {
      if (!allowed[c]) continue;
      const double rc = t.cost(c);
      if (rc < -kEps) {
        if (bland) {
          enter = c;
          break;
        }
        if (rc < best) {
          best = rc;
          enter = c;
        }
      }
    }
    if (enter < 0) return;

    int leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (int r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      if (a > kEps) {
        const double q = t.rhs(r) / a;
        if (q < ratio - 1e-12 || (q <= ratio + 1e-12 && leave >= 0 && basis[r] < basis[leave])) {
          ratio = q;
          leave = r;
        }
      }
    }
    if (leave < 0) throw DomainError("linear program is unbounded");
    degenerate_run = ratio < 1e-12 ? degenerate_run + 1 : 0;
    t.pivot(leave, enter);
    basis[leave] = enter;
    ++pivots;
  }
  throw DomainError("simplex iteration limit reached");
}

}  // namespace

LinearProgramResult solve_linear_program(const std::vector<double>& c,
                                         const std::vector<std::vector<double>>& a_ub,
                                         const std::vector<double>& b_ub,
                                         const std::vector<std::vector<double>>& a_eq,
                                         const std::vector<double>& b_eq) {
  const int n = static_cast<int>(c.size());
  const int m_ub = static_cast<int>(a_ub.size());
  const int m_eq = static_cast<int>(a_eq.size());
  const int m = m_ub + m_eq;

  // Rows needing an artificial variable: equalities and <= rows with b < 0.
  std::vector<int> art_col(m, -1);
  int n_art = 0;
  for (int i = 0; i < m_ub; ++i)
    if (b_ub[i] < 0.0) art_col[i] = n_art++;
  for (int i = 0; i < m_eq; ++i) art_col[m_ub + i] = n_art++;

  const int slack0 = n;
  const int art0 = n + m_ub;
  const int cols = n + m_ub + n_art;
  Tableau t(m, cols);
  std::vector<int> basis(m);

  for (int i = 0; i < m; ++i) {
    const bool is_eq = i >= m_ub;
    const std::vector<double>& row = is_eq ? a_eq[i - m_ub] : a_ub[i];
    const double b = is_eq ? b_eq[i - m_ub] : b_ub[i];
    const double sign = b < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) t.at(i, j) = sign * row[j];
    if (!is_eq) t.at(i, slack0 + i) = sign;
    t.rhs(i) = sign * b;
    if (art_col[i] >= 0) {
      t.at(i, art0 + art_col[i]) = 1.0;
      basis[i] = art0 + art_col[i];
    } else {
      basis[i] = slack0 + i;
    }
  }

  int pivots = 0;
  std::vector<bool> allowed(cols, true);

  if (n_art > 0) {
    // Phase 1: minimize the sum of artificials.
    for (int i = 0; i < m; ++i) {
      if (art_col[i] < 0) continue;
      for (int c2 = 0; c2 <= cols; ++c2) {
        if (c2 >= art0 && c2 < cols) continue;
        if (c2 == cols)
          t.objective() -= t.rhs(i);
        else
          t.cost(c2) -= t.at(i, c2);
      }
    }
    run_simplex(t, basis, allowed, pivots);
    if (-t.objective() > 1e-8) throw DomainError("linear program is infeasible");
    // Drive remaining artificials out of the basis where possible.
    for (int r = 0; r < m; ++r) {
      if (basis[r] < art0) continue;
      for (int c2 = 0; c2 < art0; ++c2) {
        if (std::abs(t.at(r, c2)) > kEps) {
          t.pivot(r, c2);
          basis[r] = c2;
          ++pivots;
          break;
        }
      }
    }
    for (int c2 = art0; c2 < cols; ++c2) allowed[c2] = false;
  }

  // Phase 2.
  for (int c2 = 0; c2 <= cols; ++c2) t.cost(c2) = c2 < n ? c[c2] : 0.0;
  for (int r = 0; r < m; ++r) {
    const int b = basis[r];
    const double cb = b < n ? c[b] : 0.0;
    if (cb == 0.0) continue;
    for (int c2 = 0; c2 <= cols; ++c2) t.cost(c2) -= cb * t.at(r, c2);
  }
  run_simplex(t, basis, allowed, pivots);

  LinearProgramResult res;
  res.x.assign(n, 0.0);
  for (int r = 0; r < m; ++r)
    if (basis[r] < n) res.x[basis[r]] = t.rhs(r);
  res.objective = -t.objective();
  res.pivots = pivots;
  return res;
}

}  // namespace homlab
