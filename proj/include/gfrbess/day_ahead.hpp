#pragma once

// Robust day-ahead scheduling: pick the BESS offset profile and the FCR
// droop so that SOE and power limits hold for every prosumption and
// frequency-energy realisation inside the forecast envelopes.

#include "gfrbess/battery_model.hpp"
#include "gfrbess/forecasting.hpp"

#include <Eigen/Dense>

#include <string>

namespace gfrbess::dayahead {

enum class Objective {
  MaximizeDroop,  ///< allocate the leftover budget to FCR (default)
  MinimizeDroop,  ///< literal argmin reading; always yields zero droop
};

struct DayAheadProblem {
  forecast::ProsumptionBounds bounds;
  forecast::WfForecast wf;
  Eigen::VectorXd l_hat;  ///< central prosumption forecast, kW
  double soe_0 = 0.5;
  battery::BatteryLimits limits;
  double t_total = 86400.0;  ///< s
  int n_slots = forecast::kSlots;
  double delta_f_max = 0.2;  ///< Hz, full FCR activation
  Objective objective = Objective::MaximizeDroop;
  bool smooth_offsets = true;  ///< second pass minimising sum |F_n| at the optimal droop

  double slot_hours() const { return t_total / n_slots / 3600.0; }
};

enum class SolveStatus { Optimal, Infeasible };

std::string to_string(SolveStatus s);

struct DayAheadSolution {
  double sigma_f = 0.0;           ///< kW/Hz
  Eigen::VectorXd f_offset;       ///< kW
  Eigen::VectorXd dispatch_plan;  ///< kW
  SolveStatus status = SolveStatus::Infeasible;
  std::string diagnostic;         ///< first violated constraint family when infeasible
  int lp_iterations = 0;
};

DayAheadProblem build_problem(const forecast::ProsumptionBounds& bounds, const forecast::WfForecast& wf,
                              const battery::BatteryLimits& limits, double soe_0, double delta_f_max = 0.2);

DayAheadSolution solve_day_ahead(const DayAheadProblem& problem);

Eigen::VectorXd dispatch_plan(const Eigen::VectorXd& f_offset, const Eigen::VectorXd& l_hat);

/// Battery power implied by the plan for a prosumption realisation `l`
/// (charging-positive, kW): F + l_hat - l.
Eigen::VectorXd battery_power(const DayAheadProblem& problem, const Eigen::VectorXd& f_offset,
                              const Eigen::VectorXd& l);

/// Name of the constraint family that makes the problem infeasible, or an
/// empty string when a cheap check finds none.
std::string infeasibility_family(const DayAheadProblem& problem);

}  // namespace gfrbess::dayahead
