#pragma once

// Ten-second shrinking-horizon MPC tracking the 5-minute dispatch plan.
//
// PCC quantities use the load convention of G = L + P: prosumption and
// battery power are positive when drawn from the grid, so a positive energy
// error asks the battery to charge.

#include "gfrbess/battery_model.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace gfrbess::mpc {

inline constexpr int kStepsPerSlot = 30;
inline constexpr int kStepsPerDay = 8640;
inline constexpr double kStepSeconds = 10.0;
inline constexpr double kAlpha = 10.0 / 3600.0;  // h per step

struct SlotContext {
  int k = 0;
  int k_lo = 0;
  int k_hi = kStepsPerSlot - 1;
  double g_star = 0.0;  ///< kW
  int steps_elapsed = 0;

  int horizon() const { return k_hi - k + 1; }
};

/// 10-second averages over [k_lo, k - 1].
struct MeasurementWindow {
  std::vector<double> l_hist;  ///< kW
  std::vector<double> p_hist;  ///< kW
  std::vector<double> f_hist;  ///< Hz

  void validate() const;
};

SlotContext slot_context(int k, const Eigen::VectorXd& dispatch_plan);

struct PccAverage {
  double value = 0.0;  ///< kW
  bool empty = true;   ///< no samples yet (k == k_lo)
};

PccAverage average_pcc_flow(const MeasurementWindow& window);

/// Expected slot-average PCC flow with a persistent prosumption forecast.
double expected_flow(double g_k, double l_last, const SlotContext& context);

/// Frequency-containment deviation (1/30) * sum (f_nom - f_j) * sigma_f, kW.
double fcr_deviation(std::span<const double> f_hist, double sigma_f, double f_nom = 50.0);

/// (300/3600) * (g_star - g_plus + delta_g_f), kWh.
double energy_error(double g_star, double g_plus, double delta_g_f);

enum class MpcStatus {
  Optimal,             ///< energy target reachable, linearisation converged
  Constrained,         ///< battery limits prevent reaching the energy target
  NotConverged,        ///< linearisation stopped at the iteration cap
  InfeasibleFallback,  ///< no feasible trajectory; zero current returned
};

std::string to_string(MpcStatus s);

struct MpcDiagnostics {
  int iterations = 0;
  double linearization_residual = 0.0;  ///< max |v_k+1 - v_k| over the last iteration, V
  MpcStatus status = MpcStatus::Optimal;
  bool constrained = false;
};

struct MpcResult {
  Eigen::VectorXd i_traj;  ///< A, charging-positive
  Eigen::VectorXd v_traj;  ///< predicted terminal voltage, V
  double p_setpoint = 0.0; ///< DC power of the first step, kW
  double e_k = 0.0;        ///< kWh
  MpcDiagnostics diagnostics;
};

struct MpcOptions {
  int max_iterations = 5;
  double voltage_tol = 0.1;  ///< V
  /// Second LP pass picking the flattest trajectory whose current sum is
  /// within this relative distance of the optimum.
  bool tie_break = true;
  double tie_break_rel = 1e-6;
  /// Linearise the throughput row with one effective voltage for the whole
  /// horizon (throughput-weighted mean of the prediction). The per-step
  /// estimate lets the LP trade current between low- and high-voltage steps
  /// and oscillates between bang-bang trajectories.
  bool uniform_voltage = true;
};

/// Maximise (e_k >= 0) or minimise (e_k < 0) the current sum over the
/// horizon under the throughput, current, ramp, voltage and SOC limits.
MpcResult solve_mpc(double e_k, const battery::BatteryState& state, const battery::BatteryLimits& limits,
                    const battery::TtcParams& params, double i_prev, int horizon, const MpcOptions& options = {});

/// P = v * i / 1000, kW.
double power_setpoint(double v_k, double i_0);

/// Energy delivered by a current trajectory at the given voltages, kWh.
double throughput_kwh(const Eigen::VectorXd& v, const Eigen::VectorXd& i);

}  // namespace gfrbess::mpc
