#include "gfrbess/lp.hpp"

#include "gfrbess/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gfrbess::lp {

std::string to_string(Status status) {
  switch (status) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

Problem Problem::with_columns(int n) {
  Problem p;
  p.cost = Eigen::VectorXd::Zero(n);
  p.a.resize(0, n);
  p.rhs.resize(0);
  p.lower = Eigen::VectorXd::Constant(n, -kInf);
  p.upper = Eigen::VectorXd::Constant(n, kInf);
  return p;
}

void Problem::add_row(const Eigen::Ref<const Eigen::RowVectorXd>& coefficients, RowSense s, double b) {
  detail::require(coefficients.size() == num_columns(), "lp: row width does not match column count");
  const Eigen::Index m = a.rows();
  a.conservativeResize(m + 1, Eigen::NoChange);
  a.row(m) = coefficients;
  rhs.conservativeResize(m + 1);
  rhs(m) = b;
  sense.push_back(s);
}

void Problem::validate() const {
  const int n = num_columns();
  detail::require(lower.size() == n && upper.size() == n, "lp: bound vectors must match cost size");
  detail::require(a.cols() == n, "lp: constraint matrix column count mismatch");
  detail::require(a.rows() == rhs.size() && static_cast<Eigen::Index>(sense.size()) == rhs.size(),
                  "lp: row count mismatch between matrix, rhs and senses");
  detail::require(cost.allFinite() && a.allFinite() && rhs.allFinite(), "lp: non-finite coefficients");
  for (int j = 0; j < n; ++j) {
    detail::require(!std::isnan(lower(j)) && !std::isnan(upper(j)), "lp: NaN bound");
    detail::require(lower(j) <= upper(j), "lp: crossed variable bounds");
    detail::require(lower(j) < kInf && upper(j) > -kInf, "lp: bound at wrong infinity");
  }
}

namespace {

enum class VarState { Basic, AtLower, AtUpper, FreeZero };

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Simplex {
 public:
  Simplex(const Problem& p, const Options& o) : problem_(p), opt_(o) {}

  Solution run() {
    setup();
    Solution sol;

    if (num_art_ > 0) {
      Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(total_);
      phase1.tail(num_art_).setOnes();
      const Status s1 = iterate(phase1);
      sol.iterations = iterations_;
      if (s1 == Status::IterationLimit) {
        sol.status = s1;
        return sol;
      }
      double infeasibility = 0.0;
      for (int j = total_ - num_art_; j < total_; ++j) infeasibility += std::abs(value_(j));
      const double scale = 1.0 + (problem_.rhs.size() ? problem_.rhs.cwiseAbs().maxCoeff() : 0.0);
      if (infeasibility > 1e3 * opt_.feasibility_tol * scale) {
        sol.status = Status::Infeasible;
        return sol;
      }
      for (int j = total_ - num_art_; j < total_; ++j) {
        lo_(j) = 0.0;
        up_(j) = 0.0;
        if (state_[j] != VarState::Basic) {
          value_(j) = 0.0;
          state_[j] = VarState::AtLower;
        }
      }
    }

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(total_);
    phase2.head(n_) = problem_.cost;
    const Status s2 = iterate(phase2);
    sol.iterations = iterations_;
    sol.status = s2;
    sol.x = value_.head(n_);
    // Snap to bounds to remove round-off creep.
    for (int j = 0; j < n_; ++j) sol.x(j) = std::clamp(sol.x(j), problem_.lower(j), problem_.upper(j));
    sol.objective = problem_.cost.dot(sol.x);
    return sol;
  }

 private:
  void setup() {
    n_ = problem_.num_columns();
    m_ = problem_.num_rows();

    lo_.resize(n_ + m_);
    up_.resize(n_ + m_);
    value_.resize(n_ + m_);
    lo_.head(n_) = problem_.lower;
    up_.head(n_) = problem_.upper;
    state_.assign(n_ + m_, VarState::AtLower);

    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lo_(j))) {
        value_(j) = lo_(j);
        state_[j] = VarState::AtLower;
      } else if (std::isfinite(up_(j))) {
        value_(j) = up_(j);
        state_[j] = VarState::AtUpper;
      } else {
        value_(j) = 0.0;
        state_[j] = VarState::FreeZero;
      }
    }

    const Eigen::VectorXd residual = problem_.rhs - problem_.a * value_.head(n_);

    std::vector<int> art_rows;
    std::vector<double> art_sign;
    for (int i = 0; i < m_; ++i) {
      const int s = n_ + i;
      switch (problem_.sense[i]) {
        case RowSense::LessEqual: lo_(s) = 0.0; up_(s) = kInf; break;
        case RowSense::GreaterEqual: lo_(s) = -kInf; up_(s) = 0.0; break;
        case RowSense::Equal: lo_(s) = 0.0; up_(s) = 0.0; break;
      }
    }

    basis_.assign(m_, -1);
    for (int i = 0; i < m_; ++i) {
      const int s = n_ + i;
      const double r = residual(i);
      if (r >= lo_(s) - opt_.feasibility_tol && r <= up_(s) + opt_.feasibility_tol) {
        basis_[i] = s;
        state_[s] = VarState::Basic;
        value_(s) = r;
      } else {
        const double bound = r < lo_(s) ? lo_(s) : up_(s);
        value_(s) = bound;
        state_[s] = r < lo_(s) ? VarState::AtLower : VarState::AtUpper;
        art_rows.push_back(i);
        art_sign.push_back(r - bound > 0 ? 1.0 : -1.0);
      }
    }

    num_art_ = static_cast<int>(art_rows.size());
    total_ = n_ + m_ + num_art_;
    lo_.conservativeResize(total_);
    up_.conservativeResize(total_);
    value_.conservativeResize(total_);
    state_.resize(total_, VarState::Basic);

    tableau_ = Tableau::Zero(m_, total_);
    tableau_.leftCols(n_) = problem_.a;
    for (int i = 0; i < m_; ++i) tableau_(i, n_ + i) = 1.0;

    for (int k = 0; k < num_art_; ++k) {
      const int i = art_rows[k];
      const int col = n_ + m_ + k;
      const double sgn = art_sign[k];
      tableau_.row(i) /= sgn;
      tableau_(i, col) = 1.0;
      lo_(col) = 0.0;
      up_(col) = kInf;
      const double bound = value_(n_ + i);
      value_(col) = std::abs(residual(i) - bound);
      basis_[i] = col;
      state_[col] = VarState::Basic;
    }
  }

  Status iterate(const Eigen::VectorXd& cost) {
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb(i) = cost(basis_[i]);
    Eigen::RowVectorXd reduced = cost.transpose() - cb.transpose() * tableau_;

    bool bland = false;
    int degenerate_run = 0;

    while (true) {
      if (iterations_ >= opt_.max_iterations) return Status::IterationLimit;

      int entering = -1;
      double direction = 0.0;
      double best = 0.0;
      for (int j = 0; j < total_; ++j) {
        const VarState st = state_[j];
        if (st == VarState::Basic) continue;
        if (up_(j) - lo_(j) <= 0.0) continue;
        const double d = reduced(j);
        double dir = 0.0;
        if (st == VarState::AtLower && d < -opt_.optimality_tol) dir = 1.0;
        else if (st == VarState::AtUpper && d > opt_.optimality_tol) dir = -1.0;
        else if (st == VarState::FreeZero && std::abs(d) > opt_.optimality_tol) dir = d < 0 ? 1.0 : -1.0;
        if (dir == 0.0) continue;
        if (bland) {
          entering = j;
          direction = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          entering = j;
          direction = dir;
        }
      }
      if (entering < 0) return Status::Optimal;

      const int j = entering;
      double step = up_(j) - lo_(j);  // bound flip distance (inf if unbounded side)
      int leave = -1;
      double leave_pivot = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double alpha = tableau_(i, j);
        if (std::abs(alpha) <= opt_.pivot_tol) continue;
        const double delta = -direction * alpha;
        const int b = basis_[i];
        double t = kInf;
        if (delta < 0.0 && std::isfinite(lo_(b))) t = (value_(b) - lo_(b)) / (-delta);
        else if (delta > 0.0 && std::isfinite(up_(b))) t = (up_(b) - value_(b)) / delta;
        if (!std::isfinite(t)) continue;
        t = std::max(t, 0.0);
        if (t < step - 1e-12) {
          step = t;
          leave = i;
          leave_pivot = alpha;
        } else if (leave >= 0 && t <= step + 1e-12) {
          const bool replace = bland ? basis_[i] < basis_[leave] : std::abs(alpha) > std::abs(leave_pivot);
          if (replace) {
            step = std::min(step, t);
            leave = i;
            leave_pivot = alpha;
          }
        }
      }

      if (!std::isfinite(step)) return Status::Unbounded;
      ++iterations_;

      if (step < 1e-12) {
        if (++degenerate_run > opt_.degenerate_switch) bland = true;
      } else {
        degenerate_run = 0;
      }

      value_(j) += direction * step;
      for (int i = 0; i < m_; ++i) {
        const double alpha = tableau_(i, j);
        if (alpha != 0.0) value_(basis_[i]) -= direction * step * alpha;
      }

      if (leave < 0) {
        state_[j] = direction > 0 ? VarState::AtUpper : VarState::AtLower;
        value_(j) = direction > 0 ? up_(j) : lo_(j);
        continue;
      }

      const int r = leave;
      const int out = basis_[r];
      const double delta_out = -direction * leave_pivot;
      if (delta_out < 0.0) {
        value_(out) = lo_(out);
        state_[out] = VarState::AtLower;
      } else {
        value_(out) = up_(out);
        state_[out] = VarState::AtUpper;
      }
      basis_[r] = j;
      state_[j] = VarState::Basic;

      tableau_.row(r) /= leave_pivot;
      tableau_(r, j) = 1.0;
      for (int i = 0; i < m_; ++i) {
        if (i == r) continue;
        const double factor = tableau_(i, j);
        if (factor == 0.0) continue;
        tableau_.row(i).noalias() -= factor * tableau_.row(r);
        tableau_(i, j) = 0.0;
      }
      const double dj = reduced(j);
      reduced.noalias() -= dj * tableau_.row(r);
      reduced(j) = 0.0;
    }
  }

  const Problem& problem_;
  Options opt_;
  int n_ = 0;
  int m_ = 0;
  int num_art_ = 0;
  int total_ = 0;
  int iterations_ = 0;
  Tableau tableau_;
  Eigen::VectorXd lo_, up_, value_;
  std::vector<VarState> state_;
  std::vector<int> basis_;
};

}  // namespace

Solution solve(const Problem& problem, const Options& options) {
  problem.validate();
  Simplex simplex(problem, options);
  return simplex.run();
}

}  // namespace gfrbess::lp
