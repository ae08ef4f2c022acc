#pragma once

// Dense bounded-variable primal simplex.
//
// Solves   minimize    c'x
//          subject to  a_i'x {<=, >=, =} b_i     for every row i
//                      lower <= x <= upper       (entries may be infinite)
//
// Sized for the problems in this library: a few hundred columns and up to a
// couple of thousand rows. The full tableau is kept in memory.

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <vector>

namespace gfrbess::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { LessEqual, GreaterEqual, Equal };

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(Status status);

struct Problem {
  Eigen::VectorXd cost;
  Eigen::MatrixXd a;
  Eigen::VectorXd rhs;
  std::vector<RowSense> sense;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  /// Empty problem with `n` columns, zero cost and free variables.
  static Problem with_columns(int n);

  int num_columns() const { return static_cast<int>(cost.size()); }
  int num_rows() const { return static_cast<int>(rhs.size()); }

  /// Appends a row; `coefficients` must have `num_columns()` entries.
  void add_row(const Eigen::Ref<const Eigen::RowVectorXd>& coefficients, RowSense s, double b);

  /// Throws InvalidArgument on inconsistent dimensions, NaNs or crossed bounds.
  void validate() const;
};

struct Options {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-11;
  int max_iterations = 50000;
  // Consecutive degenerate pivots tolerated before switching to Bland's rule.
  int degenerate_switch = 50;
};

struct Solution {
  Status status = Status::Infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

Solution solve(const Problem& problem, const Options& options = {});

}  // namespace gfrbess::lp
