#include "gfrbess/day_ahead.hpp"

#include "gfrbess/errors.hpp"
#include "gfrbess/lp.hpp"

#include <cmath>

namespace gfrbess::dayahead {

using detail::require;

std::string to_string(SolveStatus s) { return s == SolveStatus::Optimal ? "optimal" : "infeasible"; }

DayAheadProblem build_problem(const forecast::ProsumptionBounds& bounds, const forecast::WfForecast& wf,
                              const battery::BatteryLimits& limits, double soe_0, double delta_f_max) {
  DayAheadProblem p;
  p.n_slots = static_cast<int>(bounds.l_up.size());
  require(p.n_slots == forecast::kSlots, "day-ahead: prosumption bounds must have 288 slots");
  bounds.validate(p.n_slots);
  require(wf.inc_up.size() == p.n_slots && wf.inc_down.size() == p.n_slots && wf.w_up.size() == p.n_slots &&
              wf.w_down.size() == p.n_slots,
          "day-ahead: W_f forecast must have 288 slots");
  limits.validate();
  require(std::isfinite(soe_0), "day-ahead: non-finite initial SOE");
  require(delta_f_max > 0, "day-ahead: delta_f_max must be positive");
  p.bounds = bounds;
  p.wf = wf;
  p.l_hat = 0.5 * (bounds.l_up + bounds.l_down);
  p.soe_0 = soe_0;
  p.limits = limits;
  p.delta_f_max = delta_f_max;
  return p;
}

Eigen::VectorXd dispatch_plan(const Eigen::VectorXd& f_offset, const Eigen::VectorXd& l_hat) {
  require(f_offset.size() == l_hat.size(), "dispatch_plan: length mismatch");
  return f_offset + l_hat;
}

Eigen::VectorXd battery_power(const DayAheadProblem& problem, const Eigen::VectorXd& f_offset,
                              const Eigen::VectorXd& l) {
  require(f_offset.size() == problem.n_slots && l.size() == problem.n_slots, "battery_power: length mismatch");
  return f_offset + problem.l_hat - l;
}

namespace {

// Worst-case battery power from prosumption deviations: the battery absorbs
// most when prosumption is at its lower bound.
struct Deviations {
  Eigen::VectorXd up;    // l_hat - l_down
  Eigen::VectorXd down;  // l_hat - l_up
};

Deviations deviations(const DayAheadProblem& p) {
  return {p.l_hat - p.bounds.l_down, p.l_hat - p.bounds.l_up};
}

// Columns: [sigma, F_0 .. F_{N-1}] and, when `split`, [|F|_0 .. |F|_{N-1}].
lp::Problem assemble(const DayAheadProblem& p, bool split) {
  const int n = p.n_slots;
  const int cols = 1 + n + (split ? n : 0);
  const double tau = p.slot_hours();
  const double e = p.limits.e_nom;
  const Deviations dev = deviations(p);

  lp::Problem prob = lp::Problem::with_columns(cols);
  prob.lower(0) = 0.0;
  const int rows = 4 * n + (split ? 2 * n : 0);
  prob.a = Eigen::MatrixXd::Zero(rows, cols);
  prob.rhs.resize(rows);
  prob.sense.resize(rows);

  double cum_up = 0.0;
  double cum_down = 0.0;
  int r = 0;
  for (int k = 0; k < n; ++k) {
    cum_up += tau * dev.up(k);
    cum_down += tau * dev.down(k);

    prob.a.block(r, 1, 1, k + 1).setConstant(tau);
    prob.a(r, 0) = p.wf.up_end(k) / 3600.0;
    prob.rhs(r) = (p.limits.soc_max - p.soe_0) * e - cum_up;
    prob.sense[r++] = lp::RowSense::LessEqual;

    prob.a.block(r, 1, 1, k + 1).setConstant(tau);
    prob.a(r, 0) = p.wf.down_end(k) / 3600.0;
    prob.rhs(r) = (p.limits.soc_min - p.soe_0) * e - cum_down;
    prob.sense[r++] = lp::RowSense::GreaterEqual;

    prob.a(r, 1 + k) = 1.0;
    prob.a(r, 0) = p.delta_f_max;
    prob.rhs(r) = p.limits.p_max - dev.up(k);
    prob.sense[r++] = lp::RowSense::LessEqual;

    prob.a(r, 1 + k) = 1.0;
    prob.a(r, 0) = -p.delta_f_max;
    prob.rhs(r) = p.limits.p_min - dev.down(k);
    prob.sense[r++] = lp::RowSense::GreaterEqual;
  }
  if (split) {
    for (int k = 0; k < n; ++k) {
      prob.lower(1 + n + k) = 0.0;
      prob.a(r, 1 + k) = 1.0;
      prob.a(r, 1 + n + k) = -1.0;
      prob.rhs(r) = 0.0;
      prob.sense[r++] = lp::RowSense::LessEqual;
      prob.a(r, 1 + k) = -1.0;
      prob.a(r, 1 + n + k) = -1.0;
      prob.rhs(r) = 0.0;
      prob.sense[r++] = lp::RowSense::LessEqual;
    }
  }
  return prob;
}

}  // namespace

std::string infeasibility_family(const DayAheadProblem& p) {
  if (p.soe_0 < p.limits.soc_min || p.soe_0 > p.limits.soc_max) return "initial SOE outside [soe_min, soe_max]";
  const Deviations dev = deviations(p);
  for (int k = 0; k < p.n_slots; ++k)
    if (dev.up(k) - dev.down(k) > p.limits.p_max - p.limits.p_min)
      return "power limits (slot " + std::to_string(k) + ")";
  return "energy limits (SOE envelope)";
}

DayAheadSolution solve_day_ahead(const DayAheadProblem& problem) {
  require(problem.n_slots == problem.bounds.l_up.size() && problem.l_hat.size() == problem.n_slots,
          "day-ahead: inconsistent problem dimensions");
  require(std::abs(problem.n_slots * (problem.t_total / problem.n_slots) - problem.t_total) < 1e-9,
          "day-ahead: slot length does not divide the horizon");

  DayAheadSolution sol;
  if (problem.soe_0 < problem.limits.soc_min || problem.soe_0 > problem.limits.soc_max) {
    sol.diagnostic = infeasibility_family(problem);
    return sol;
  }

  lp::Problem stage1 = assemble(problem, false);
  stage1.cost(0) = problem.objective == Objective::MaximizeDroop ? -1.0 : 1.0;
  const lp::Solution s1 = lp::solve(stage1);
  sol.lp_iterations = s1.iterations;
  if (s1.status == lp::Status::Unbounded)
    throw InvariantViolation("day-ahead: unbounded LP despite finite power limits");
  if (s1.status != lp::Status::Optimal) {
    sol.diagnostic = s1.status == lp::Status::Infeasible ? infeasibility_family(problem)
                                                          : "LP " + lp::to_string(s1.status);
    return sol;
  }

  const int n = problem.n_slots;
  double sigma = std::max(0.0, s1.x(0));
  Eigen::VectorXd offset = s1.x.segment(1, n);

  if (problem.smooth_offsets) {
    lp::Problem stage2 = assemble(problem, true);
    const double slack = 1e-9 * std::max(1.0, sigma);
    stage2.lower(0) = std::max(0.0, sigma - slack);
    stage2.upper(0) = sigma;
    stage2.cost.tail(n).setOnes();
    const lp::Solution s2 = lp::solve(stage2);
    sol.lp_iterations += s2.iterations;
    if (s2.status == lp::Status::Optimal) {
      sigma = std::max(0.0, s2.x(0));
      offset = s2.x.segment(1, n);
    }
  }

  sol.status = SolveStatus::Optimal;
  sol.sigma_f = sigma;
  sol.f_offset = offset;
  sol.dispatch_plan = dispatch_plan(offset, problem.l_hat);
  return sol;
}

}  // namespace gfrbess::dayahead
