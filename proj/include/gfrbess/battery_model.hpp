#pragma once

// Electrical models of the battery shared by every control stage.
//
// Sign convention: battery current and power are charging-positive. A
// positive current raises the state of charge and the terminal voltage.

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace gfrbess::battery {

struct RcBranch {
  double r_ohm = 0.0;
  double c_farad = 0.0;

  double tau_s() const { return r_ohm * c_farad; }
};

/// Parameter set of the Three-Time-Constant circuit valid over one SOC interval.
struct TtcBin {
  double soc_lo = 0.0;
  double soc_hi = 1.0;
  double e_m = 0.0;       ///< open-circuit voltage, V
  double r_series = 0.0;  ///< ohm
  std::array<RcBranch, 3> branches{};
};

/// Series resistance plus three RC branches, piecewise constant in SOC.
struct TtcParams {
  std::vector<TtcBin> bins;

  /// Bin whose [soc_lo, soc_hi) contains `soc`; the last bin is closed at 1.
  /// Throws InvalidArgument when no bin covers `soc`.
  const TtcBin& bin_for(double soc) const;

  /// Positivity of every parameter and an exact partition of [0, 1].
  void validate() const;

  /// Synthetic parameters: OCV rising linearly 590 V -> 730 V over SOC
  /// (sampled at the centre of ten bins), 5 mOhm series resistance and
  /// branch time constants of 10 s, 200 s and 3000 s.
  static TtcParams synthetic_default();
};

struct BatteryState {
  double soc = 0.5;
  Eigen::Vector3d x = Eigen::Vector3d::Zero();  ///< RC branch voltages, V
  double v_dc = 0.0;                            ///< terminal voltage, V
  double timestamp = 0.0;                       ///< s since day start

  /// State at rest: branch voltages zero, terminal voltage equal to the OCV.
  static BatteryState at_rest(double soc, const TtcParams& params, double timestamp = 0.0);
};

struct BatteryLimits {
  double i_min = -1200.0;  ///< A
  double i_max = 1200.0;
  double di_min = -600.0;  ///< A per 10 s step
  double di_max = 600.0;
  double v_min = 550.0;  ///< V
  double v_max = 780.0;
  double soc_min = 0.1;
  double soc_max = 0.9;
  double c_nom = 752.0;   ///< Ah
  double e_nom = 500.0;   ///< kWh
  double p_min = -720.0;  ///< kW, AC side (discharge)
  double p_max = 720.0;
  double s_nom = 720.0;  ///< kVA

  void validate() const;
};

/// Coulomb counting: soc + (dt/3600) * i / c_nom. Not clamped.
double soc_step(double soc, double current_a, double dt_s, double c_nom_ah);

/// Exact discretisation of the RC branches over `dt_s` with constant
/// current, parameters taken from the bin of `state.soc`. SOC is left
/// untouched; see `battery_step` for the combined update.
BatteryState ttc_step(const BatteryState& state, double i_dc, double dt_s, const TtcParams& params);

/// SOC and TTC update over one step with the same current.
BatteryState battery_step(const BatteryState& state, double i_dc, double dt_s, const TtcParams& params,
                          double c_nom_ah);

/// Horizon-long affine maps, parameters frozen at the bin of `soc`:
///   v   = phi_v * x + psi_i_v * i + psi_1_v
///   soc = phi_soc * soc_k + psi_i_soc * i
/// Row j describes the quantity at the end of step j.
struct TransitionMatrices {
  Eigen::MatrixXd phi_v;      ///< horizon x 3
  Eigen::MatrixXd psi_i_v;    ///< horizon x horizon, lower triangular
  Eigen::VectorXd psi_1_v;    ///< horizon
  Eigen::VectorXd phi_soc;    ///< horizon (all ones)
  Eigen::MatrixXd psi_i_soc;  ///< horizon x horizon, lower triangular

  Eigen::VectorXd voltage(const Eigen::Vector3d& x, const Eigen::VectorXd& current) const;
  Eigen::VectorXd soc(double soc_k, const Eigen::VectorXd& current) const;
};

TransitionMatrices build_transition_matrices(const TtcParams& params, double soc, int horizon, double dt_s,
                                             double c_nom_ah = 752.0);

/// AC set-point to DC power. Charging (p >= 0) loses power on the way in,
/// discharging draws more from the cells than reaches the AC side.
double ac_to_dc_power(double p_ac_kw, double eta);

/// Inverse of `ac_to_dc_power`.
double dc_to_ac_power(double p_dc_kw, double eta);

/// Terminal voltage after one step of `dt_s` at constant current `i_dc`.
double terminal_voltage(const BatteryState& state, double i_dc, double dt_s, const TtcParams& params);

/// DC current that draws `p_dc_kw` at the one-step terminal voltage:
/// fixed point of i = 1000 P / v(i), started at 1000 P / v_dc.
/// Throws NumericFailure after 20 iterations, InfeasibleOperatingPoint when
/// the voltage is not positive.
double dc_current_from_power(double p_dc_kw, const BatteryState& state, const TtcParams& params,
                             double dt_s = 1.0);

/// JSON configuration loading (schema in docs/config.md).
TtcParams load_ttc_params(const std::string& json_text);
BatteryLimits load_limits(const std::string& json_text);

}  // namespace gfrbess::battery
