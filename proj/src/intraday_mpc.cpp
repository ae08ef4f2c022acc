#include "gfrbess/intraday_mpc.hpp"

#include "gfrbess/errors.hpp"
#include "gfrbess/lp.hpp"

#include <cmath>
#include <numeric>
#include <optional>

namespace gfrbess::mpc {

using detail::require;

std::string to_string(MpcStatus s) {
  switch (s) {
    case MpcStatus::Optimal: return "optimal";
    case MpcStatus::Constrained: return "constrained";
    case MpcStatus::NotConverged: return "not_converged";
    case MpcStatus::InfeasibleFallback: return "infeasible_fallback";
  }
  return "unknown";
}

void MeasurementWindow::validate() const {
  require(l_hist.size() == p_hist.size() && l_hist.size() == f_hist.size(),
          "measurement window: histories must have equal length");
}

SlotContext slot_context(int k, const Eigen::VectorXd& dispatch_plan) {
  require(dispatch_plan.size() == kStepsPerDay / kStepsPerSlot, "slot_context: dispatch plan must have 288 slots");
  require(k >= 0 && k < kStepsPerDay, "slot_context: k outside [0, 8639]");
  SlotContext c;
  c.k = k;
  c.k_lo = (k / kStepsPerSlot) * kStepsPerSlot;
  c.k_hi = c.k_lo + kStepsPerSlot - 1;
  c.g_star = dispatch_plan(k / kStepsPerSlot);
  c.steps_elapsed = k - c.k_lo;
  return c;
}

PccAverage average_pcc_flow(const MeasurementWindow& window) {
  window.validate();
  if (window.l_hist.empty()) return {};
  double sum = 0.0;
  for (std::size_t j = 0; j < window.l_hist.size(); ++j) sum += window.l_hist[j] + window.p_hist[j];
  return {sum / static_cast<double>(window.l_hist.size()), false};
}

double expected_flow(double g_k, double l_last, const SlotContext& context) {
  const int elapsed = context.k - context.k_lo;
  const int remaining = context.k_hi - context.k + 1;
  require(elapsed >= 0 && remaining >= 1, "expected_flow: k outside its slot");
  return (elapsed * g_k + remaining * l_last) / static_cast<double>(elapsed + remaining);
}

double fcr_deviation(std::span<const double> f_hist, double sigma_f, double f_nom) {
  double sum = 0.0;
  for (double f : f_hist) sum += (f_nom - f) * sigma_f;
  return sum / kStepsPerSlot;
}

double energy_error(double g_star, double g_plus, double delta_g_f) {
  require(std::isfinite(g_star) && std::isfinite(g_plus) && std::isfinite(delta_g_f),
          "energy_error: non-finite input");
  return 300.0 / 3600.0 * (g_star - g_plus + delta_g_f);
}

double power_setpoint(double v_k, double i_0) { return v_k * i_0 / 1000.0; }

double throughput_kwh(const Eigen::VectorXd& v, const Eigen::VectorXd& i) { return kAlpha * v.dot(i) / 1000.0; }

namespace {

struct Frame {
  int h = 0;
  double sign = 1.0;  // +1 maximise current sum, -1 minimise
  battery::TransitionMatrices tm;
  Eigen::VectorXd v_free;    // voltage with zero current
  Eigen::VectorXd soc_free;  // SOC with zero current
};

// Rows shared by both passes; `cols` >= h, extra columns get zero coefficients.
lp::Problem base_problem(const Frame& f, const battery::BatteryLimits& lim, double i_prev, const Eigen::VectorXd& v_hat,
                         double e_k, int cols) {
  const int h = f.h;
  lp::Problem p = lp::Problem::with_columns(cols);
  p.lower.head(h).setConstant(lim.i_min);
  p.upper.head(h).setConstant(lim.i_max);

  const int rows = 1 + 2 * h + 4 * h;
  p.a = Eigen::MatrixXd::Zero(rows, cols);
  p.rhs.resize(rows);
  p.sense.resize(rows);
  int r = 0;

  p.a.block(r, 0, 1, h) = (kAlpha / 1000.0) * v_hat.transpose();
  p.rhs(r) = e_k;
  p.sense[r++] = f.sign > 0 ? lp::RowSense::LessEqual : lp::RowSense::GreaterEqual;

  for (int j = 0; j < h; ++j) {
    double anchor = 0.0;
    p.a(r, j) = 1.0;
    if (j > 0) p.a(r, j - 1) = -1.0;
    else anchor = i_prev;
    p.rhs(r) = lim.di_max + anchor;
    p.sense[r++] = lp::RowSense::LessEqual;
    p.a.row(r) = p.a.row(r - 1);
    p.rhs(r) = lim.di_min + anchor;
    p.sense[r++] = lp::RowSense::GreaterEqual;
  }
  for (int j = 0; j < h; ++j) {
    p.a.block(r, 0, 1, h) = f.tm.psi_i_v.row(j);
    p.rhs(r) = lim.v_max - f.v_free(j);
    p.sense[r++] = lp::RowSense::LessEqual;
    p.a.block(r, 0, 1, h) = f.tm.psi_i_v.row(j);
    p.rhs(r) = lim.v_min - f.v_free(j);
    p.sense[r++] = lp::RowSense::GreaterEqual;
    p.a.block(r, 0, 1, h) = f.tm.psi_i_soc.row(j);
    p.rhs(r) = lim.soc_max - f.soc_free(j);
    p.sense[r++] = lp::RowSense::LessEqual;
    p.a.block(r, 0, 1, h) = f.tm.psi_i_soc.row(j);
    p.rhs(r) = lim.soc_min - f.soc_free(j);
    p.sense[r++] = lp::RowSense::GreaterEqual;
  }
  return p;
}

struct PassResult {
  Eigen::VectorXd current;
  bool throughput_binding = false;
};

std::optional<PassResult> solve_linearized(const Frame& f, const battery::BatteryLimits& lim, double i_prev,
                                           const Eigen::VectorXd& v_hat, double e_k, const MpcOptions& opt) {
  const int h = f.h;
  lp::Problem first = base_problem(f, lim, i_prev, v_hat, e_k, h);
  first.cost.setConstant(-f.sign);
  const lp::Solution s1 = lp::solve(first);
  if (s1.status != lp::Status::Optimal) return std::nullopt;

  PassResult out;
  out.current = s1.x;
  const double energy = throughput_kwh(v_hat, s1.x);
  out.throughput_binding = std::abs(energy - e_k) <= 1e-6 * std::max(1.0, std::abs(e_k));
  if (!opt.tie_break || h == 1) return out;

  // Flattest trajectory with nearly the same current sum: minimise the
  // total intra-horizon variation sum |i_j - i_{j-1}|.
  const int cols = h + (h - 1);
  lp::Problem second = base_problem(f, lim, i_prev, v_hat, e_k, cols);
  second.lower.tail(h - 1).setZero();
  second.upper.tail(h - 1).setConstant(lp::kInf);
  second.cost.tail(h - 1).setOnes();
  const double best = s1.x.sum();
  const double tol = opt.tie_break_rel * std::max(1.0, std::abs(best));
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(cols);
  row.head(h).setConstant(f.sign);
  second.add_row(row, lp::RowSense::GreaterEqual, f.sign * best - tol);
  for (int j = 1; j < h; ++j) {
    row.setZero();
    row(j) = 1.0;
    row(j - 1) = -1.0;
    row(h + j - 1) = -1.0;
    second.add_row(row, lp::RowSense::LessEqual, 0.0);
    row(j) = -1.0;
    row(j - 1) = 1.0;
    second.add_row(row, lp::RowSense::LessEqual, 0.0);
  }
  const lp::Solution s2 = lp::solve(second);
  if (s2.status == lp::Status::Optimal) out.current = s2.x.head(h);
  return out;
}

// Voltage at which the trajectory's current sum carries its true throughput.
double effective_voltage(const Eigen::VectorXd& v, const Eigen::VectorXd& i) {
  const double total = i.sum();
  const double weighted = v.dot(i);
  if (std::abs(total) < 1e-6 * v.size() || weighted / total <= 0.0) return v.mean();
  return weighted / total;
}

}  // namespace

MpcResult solve_mpc(double e_k, const battery::BatteryState& state, const battery::BatteryLimits& limits,
                    const battery::TtcParams& params, double i_prev, int horizon, const MpcOptions& options) {
  require(std::isfinite(e_k) && std::isfinite(i_prev), "solve_mpc: non-finite input");
  require(horizon >= 1 && horizon <= kStepsPerSlot, "solve_mpc: horizon must lie in [1, 30]");
  limits.validate();

  Frame f;
  f.h = horizon;
  f.sign = e_k >= 0 ? 1.0 : -1.0;
  f.tm = battery::build_transition_matrices(params, state.soc, horizon, kStepSeconds, limits.c_nom);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(horizon);
  f.v_free = f.tm.voltage(state.x, zero);
  f.soc_free = f.tm.soc(state.soc, zero);

  MpcResult result;
  result.e_k = e_k;
  Eigen::VectorXd v_hat = Eigen::VectorXd::Constant(horizon, state.v_dc);
  std::optional<Eigen::VectorXd> current;
  bool converged = false;
  bool binding = false;

  for (int it = 1; it <= options.max_iterations; ++it) {
    const auto pass = solve_linearized(f, limits, i_prev, v_hat, e_k, options);
    if (!pass) break;
    result.diagnostics.iterations = it;
    current = pass->current;
    binding = pass->throughput_binding;
    Eigen::VectorXd v_new = f.tm.voltage(state.x, *current);
    if (options.uniform_voltage) v_new.setConstant(effective_voltage(v_new, *current));
    result.diagnostics.linearization_residual = (v_new - v_hat).cwiseAbs().maxCoeff();
    v_hat = v_new;
    if (result.diagnostics.linearization_residual < options.voltage_tol) {
      converged = true;
      break;
    }
  }

  if (!current) {
    result.i_traj = zero;
    result.v_traj = f.v_free;
    result.diagnostics.status = MpcStatus::InfeasibleFallback;
    result.p_setpoint = 0.0;
    return result;
  }

  result.i_traj = *current;
  result.v_traj = f.tm.voltage(state.x, result.i_traj);
  result.p_setpoint = power_setpoint(result.v_traj(0), result.i_traj(0));
  result.diagnostics.constrained = !binding;
  if (!converged) result.diagnostics.status = MpcStatus::NotConverged;
  else if (!binding) result.diagnostics.status = MpcStatus::Constrained;
  else result.diagnostics.status = MpcStatus::Optimal;
  return result;
}

}  // namespace gfrbess::mpc
