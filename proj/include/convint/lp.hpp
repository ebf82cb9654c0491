#pragma once

// Dense two-phase simplex for the tiny standard-form programs that show up in
// hull membership and ray shooting:
//
//     minimize c^T x  subject to  A x = b,  x >= 0.
//
// Problems have at most a few hundred columns and ~10 rows, so a full tableau
// with Bland's rule is fast enough and fully deterministic.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace convint::lp {

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Options {
  double feasibility_tol = 1e-9;
  double pivot_tol = 1e-11;
  /// 0 selects the default cap of 10 * (columns + rows).
  int max_iterations = 0;
  /// Stop after phase 1 (pure feasibility).
  bool feasibility_only = false;
};

struct Result {
  Status status = Status::infeasible;
  double objective = std::numeric_limits<double>::quiet_NaN();
  /// Phase-1 optimum: the l1 norm of the equality residual.
  double residual = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> x;
  int iterations = 0;
};

namespace detail {

class Tableau {
 public:
  Tableau(int rows, int cols) : rows_(rows), cols_(cols), t_(rows + 1, cols + 1), basis_(rows) {}

  double& at(int r, int c) { return t_(r, c); }
  double rhs(int r) const { return t_(r, cols_); }
  double& obj(int c) { return t_(rows_, c); }
  int basis(int r) const { return basis_[r]; }
  void set_basis(int r, int c) { basis_[r] = c; }

  void pivot(int pr, int pc) {
    const double inv = 1.0 / t_(pr, pc);
    t_.row(pr) *= inv;
    for (int r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = t_(r, pc);
      if (f != 0.0) t_.row(r) -= f * t_.row(pr);
    }
    basis_[pr] = pc;
  }

  // Bland's rule over columns [0, active_cols). Returns false on unbounded.
  Status run(int active_cols, double pivot_tol, int max_iter, int& iterations) {
    while (true) {
      int enter = -1;
      for (int c = 0; c < active_cols; ++c) {
        if (t_(rows_, c) < -pivot_tol) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return Status::optimal;
      if (iterations >= max_iter) return Status::iteration_limit;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < rows_; ++r) {
        const double a = t_(r, enter);
        if (a <= pivot_tol) continue;
        const double ratio = t_(r, cols_) / a;
        if (leave < 0 || ratio < best - 1e-14) {
          best = ratio;
          leave = r;
        } else if (ratio <= best + 1e-14 && basis_[r] < basis_[leave]) {
          leave = r;
        }
      }
      if (leave < 0) return Status::unbounded;
      pivot(leave, enter);
      ++iterations;
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

 private:
  int rows_;
  int cols_;
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace detail

/// Solves min c^T x, A x = b, x >= 0. `c` may be empty for a feasibility problem.
inline Result solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                    const Options& opts = {}) {
  const int m = static_cast<int>(A.rows());
  const int nvar = static_cast<int>(A.cols());
  const int total = nvar + m;  // structural + artificial columns
  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : 10 * (nvar + m);

  detail::Tableau tab(m, total);
  for (int r = 0; r < m; ++r) {
    const double sign = b(r) < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < nvar; ++j) tab.at(r, j) = sign * A(r, j);
    for (int j = 0; j < m; ++j) tab.at(r, nvar + j) = (j == r) ? 1.0 : 0.0;
    tab.at(r, total) = sign * b(r);
    tab.set_basis(r, nvar + r);
  }
  // Phase 1 objective: sum of artificials, expressed in nonbasic terms.
  for (int j = 0; j <= total; ++j) tab.obj(j) = 0.0;
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < nvar; ++j) tab.obj(j) -= tab.at(r, j);
    tab.obj(total) -= tab.at(r, total);
  }

  Result res;
  Status st = tab.run(nvar, opts.pivot_tol, max_iter, res.iterations);
  if (st == Status::iteration_limit) {
    res.status = st;
    return res;
  }
  res.residual = -tab.obj(total);
  if (res.residual > opts.feasibility_tol) {
    res.status = Status::infeasible;
    return res;
  }

  // Drive zero-level artificials out of the basis where possible.
  for (int r = 0; r < m; ++r) {
    if (tab.basis(r) < nvar) continue;
    for (int j = 0; j < nvar; ++j) {
      if (std::abs(tab.at(r, j)) > 1e-9) {
        tab.pivot(r, j);
        break;
      }
    }
  }

  auto extract = [&] {
    res.x.assign(nvar, 0.0);
    for (int r = 0; r < m; ++r) {
      if (tab.basis(r) < nvar) res.x[tab.basis(r)] = std::max(0.0, tab.rhs(r));
    }
  };

  if (opts.feasibility_only || c.size() == 0) {
    extract();
    res.status = Status::optimal;
    res.objective = 0.0;
    return res;
  }

  // Phase 2: reduced costs for the true objective; artificial columns are frozen.
  for (int j = 0; j <= total; ++j) tab.obj(j) = (j < nvar) ? c(j) : 0.0;
  for (int r = 0; r < m; ++r) {
    const int bc = tab.basis(r);
    if (bc >= nvar) continue;
    const double cb = c(bc);
    if (cb == 0.0) continue;
    for (int j = 0; j <= total; ++j) tab.obj(j) -= cb * tab.at(r, j);
  }
  st = tab.run(nvar, opts.pivot_tol, max_iter, res.iterations);
  res.status = st;
  if (st == Status::optimal) {
    extract();
    res.objective = -tab.obj(total);
  }
  return res;
}

}  // namespace convint::lp
